"""Experiment grids, per-run rows and their CSV form."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional

from certmesh.metrics import MetricsReport, compute_rates
from certmesh.sim.scenario import ScenarioConfig, run_scenario

CSV_HEADER = ("attacker_fraction", "mpktv", "known_certs", "mode", "replicate", "seed", "valid_rate",
              "corrupted_rate", "mean_delay_s", "failed", "messages_sent", "bytes_sent")

ATTACKER_FRACTIONS = (0.0, 0.1, 0.2, 0.3, 0.4)
MPKTVS = (0.5, 0.6, 0.7, 0.8, 0.9)
KNOWN_CERTS = (0, 5, 10, 20)


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig = ScenarioConfig()
    attacker_fractions: tuple = ATTACKER_FRACTIONS
    mpktvs: tuple = MPKTVS
    known_certs: tuple = KNOWN_CERTS
    replications: Optional[int] = None
    base_seed: Optional[int] = None

    @property
    def reps(self) -> int:
        return self.replications or self.base.replications

    @property
    def seed0(self) -> int:
        return self.base.seed if self.base_seed is None else self.base_seed

    def cells(self) -> list[ScenarioConfig]:
        return [self.base.replace(attacker_fraction=f, mpktv=m, known_certs=k)
                for f, m, k in product(self.attacker_fractions, self.mpktvs, self.known_certs)]

    def seeds(self) -> list[int]:
        return [self.seed0 + r for r in range(self.reps)]


@dataclass(frozen=True)
class RunRow:
    attacker_fraction: float
    mpktv: float
    known_certs: int
    mode: str
    replicate: int
    seed: int
    valid_rate: float
    corrupted_rate: float
    mean_delay_s: float
    failed: float
    messages_sent: float
    bytes_sent: float

    def sort_key(self):
        rep = self.replicate if isinstance(self.replicate, int) else math.inf
        return (self.mode, self.attacker_fraction, self.mpktv, self.known_certs, rep)

    @property
    def cell(self):
        return (self.mode, self.attacker_fraction, self.mpktv, self.known_certs)


def row_from_report(config: ScenarioConfig, replicate: int, seed: int, report: MetricsReport) -> RunRow:
    rates = compute_rates(report)
    return RunRow(config.attacker_fraction, config.mpktv, config.known_certs, config.attacker_mode,
                  replicate, seed, rates.valid_rate, rates.corrupted_rate, rates.mean_delay,
                  report.failed, report.messages_sent, report.bytes_sent)


def _run_one(task):
    config, replicate, seed = task
    try:
        return row_from_report(config, replicate, seed, run_scenario(config, seed))
    except Exception as exc:
        raise SweepError(f"run failed for cell (mode={config.attacker_mode}, attacker_fraction="
                         f"{config.attacker_fraction}, mpktv={config.mpktv}, known_certs="
                         f"{config.known_certs}) seed={seed}: {exc!r}") from exc


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[RunRow]:
    """Every cell times every replicate, one row per run, in canonical order."""
    tasks = [(cell, r, seed) for cell in spec.cells() for r, seed in enumerate(spec.seeds())]
    if workers <= 1:
        rows = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, tasks, chunksize=4))
    return sorted(rows, key=RunRow.sort_key)


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return statistics.fmean(vals) if vals else math.nan


def aggregate(rows: list[RunRow]) -> list[RunRow]:
    """One row per cell with the replicate means; NaN delays are left out of the mean."""
    by_cell: dict = {}
    for row in rows:
        by_cell.setdefault(row.cell, []).append(row)
    out = []
    for (mode, f, m, k), group in sorted(by_cell.items()):
        out.append(RunRow(f, m, k, mode, "mean", "NA",
                          _mean(r.valid_rate for r in group), _mean(r.corrupted_rate for r in group),
                          _mean(r.mean_delay_s for r in group), _mean(r.failed for r in group),
                          _mean(r.messages_sent for r in group), _mean(r.bytes_sent for r in group)))
    return out


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if math.isnan(v):
        return "NA"
    return f"{v:.6f}"


def format_rows(rows: Iterable[RunRow]) -> list[list[str]]:
    return [[_fmt(getattr(r, name)) for name in CSV_HEADER] for r in sorted(rows, key=RunRow.sort_key)]


def emit_csv(rows: Iterable[RunRow], out=None) -> str:
    """Write rows under the fixed header; returns the text and writes it to ``out`` if given.

    ``out`` may be a path or a text stream.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(format_rows(rows))
    text = buf.getvalue()
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(source) -> list[dict]:
    """Parse an emitted CSV back into dicts of numbers (NA becomes NaN)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for key, val in rec.items():
            if key == "mode" or (key in ("replicate", "seed") and not val.lstrip("-").isdigit()):
                parsed[key] = val
            elif val == "NA":
                parsed[key] = math.nan
            elif key in ("known_certs", "replicate", "seed"):
                parsed[key] = int(val)
            else:
                parsed[key] = float(val)
        rows.append(parsed)
    return rows


@dataclass
class CellSummary:
    valid_rate: float
    corrupted_rate: float
    mean_delay_s: float
    rows: list = field(default_factory=list)


def summarise(rows: list[RunRow]) -> dict:
    """Map ``(mode, attacker_fraction, mpktv, known_certs)`` to replicate means."""
    return {agg.cell: CellSummary(agg.valid_rate, agg.corrupted_rate, agg.mean_delay_s,
                                  [r for r in rows if r.cell == agg.cell])
            for agg in aggregate(rows)}
