"""``certmesh run | sweep | replay``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from certmesh.harness.config import ConfigParseError, parse_config, parse_value
from certmesh.harness.sweep import SweepSpec, aggregate, emit_csv, run_sweep
from certmesh.metrics import compute_rates
from certmesh.sim.scenario import CONFIG_FIELDS, ConfigError, ScenarioConfig, run_scenario

SEED_ENV = "CERTMESH_SEED"


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certmesh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value scenario file; flags override it")
        for key in CONFIG_FIELDS:
            p.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, metavar="VALUE")

    run = sub.add_parser("run", help="one scenario, one seed")
    common(run)
    run.add_argument("--json", action="store_true", help="print the full report as JSON")

    sweep = sub.add_parser("sweep", help="attacker fraction x MPKTV x known certificates grid")
    common(sweep)
    sweep.add_argument("--out", help="CSV destination (default stdout)")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--fractions", type=_float_list, default=None)
    sweep.add_argument("--mpktvs", type=_float_list, default=None)
    sweep.add_argument("--known", type=_int_list, default=None)
    sweep.add_argument("--no-means", action="store_true", help="omit the per-cell mean rows")

    replay = sub.add_parser("replay", help="re-run one scenario with an event trace")
    common(replay)
    replay.add_argument("--trace", required=True, help="trace file (tab-separated, one event per line)")
    return parser


def load_config(args) -> ScenarioConfig:
    config = parse_config(args.config) if args.config else ScenarioConfig()
    overrides = {}
    for key in CONFIG_FIELDS:
        raw = getattr(args, "cfg_" + key)
        if raw is not None:
            overrides[key] = parse_value(key, raw)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        overrides["seed"] = parse_value("seed", env)
    return config.replace(**overrides) if overrides else config


def _report_dict(config, report) -> dict:
    rates = compute_rates(report)
    return {
        "seed": config.seed, "requested": report.requested, "accepted_valid": report.accepted_valid,
        "accepted_corrupted": report.accepted_corrupted, "failed": report.failed,
        "valid_rate": rates.valid_rate, "corrupted_rate": rates.corrupted_rate,
        "mean_delay_s": rates.mean_delay, "messages_sent": report.messages_sent,
        "bytes_sent": report.bytes_sent, "delays": report.delays,
    }


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except (ConfigError, ConfigParseError, OSError) as exc:
        print(f"certmesh: config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run":
            report = run_scenario(config)
            data = _report_dict(config, report)
            if args.json:
                print(json.dumps(data, sort_keys=True))
            else:
                for key in ("seed", "requested", "accepted_valid", "accepted_corrupted", "failed",
                            "valid_rate", "corrupted_rate", "mean_delay_s", "messages_sent", "bytes_sent"):
                    print(f"{key}={data[key]}")
        elif args.command == "sweep":
            spec = SweepSpec(config,
                             attacker_fractions=args.fractions or SweepSpec.attacker_fractions,
                             mpktvs=args.mpktvs or SweepSpec.mpktvs,
                             known_certs=args.known or SweepSpec.known_certs)
            rows = run_sweep(spec, workers=args.workers)
            if not args.no_means:
                rows = rows + aggregate(rows)
            emit_csv(rows, args.out or sys.stdout)
        elif args.command == "replay":
            with open(args.trace, "w") as fh:
                report = run_scenario(config, trace=fh)
            print(json.dumps(_report_dict(config, report), sort_keys=True))
    except ConfigError as exc:
        print(f"certmesh: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"certmesh: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
