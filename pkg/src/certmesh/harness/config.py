"""Plain-text ``key=value`` scenario configs."""

from __future__ import annotations

import math
from dataclasses import fields
from pathlib import Path

from certmesh.sim.scenario import CONFIG_FIELDS, ConfigError, ScenarioConfig

_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


class ConfigParseError(ConfigError):
    def __init__(self, message: str, lineno: int | None = None, path=None):
        where = f"{path or '<config>'}:{lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.lineno = lineno


def parse_value(key: str, raw: str):
    """Turn the text of one config value into the field's Python type."""
    if key not in _TYPES:
        raise ConfigError(f"unknown key {key!r}")
    kind = _TYPES[key]
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"empty value for {key!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return math.inf if raw.lower() in ("inf", "infinity", "none", "off") else float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "tuple":
            parts = raw.replace("x", ",").replace("X", ",").split(",")
            conv = int if key == "ttl_schedule" else float
            return tuple(conv(p) for p in parts if p.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key!r}") from None


def parse_config_text(text: str, path=None) -> ScenarioConfig:
    values = {}
    base = ScenarioConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected key=value, got {line!r}", lineno, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, raw)
            base.replace(**{key: values[key]})
        except ConfigError as exc:
            raise ConfigParseError(str(exc), lineno, path) from None
    try:
        return ScenarioConfig(**values)
    except ConfigError as exc:
        raise ConfigParseError(str(exc), None, path) from None


def parse_config(path) -> ScenarioConfig:
    """Read a config file; keys left out keep their defaults."""
    path = Path(path)
    return parse_config_text(path.read_text(), path)


def format_config(config: ScenarioConfig) -> str:
    lines = []
    for key in CONFIG_FIELDS:
        v = getattr(config, key)
        if key == "area":
            v = f"{v[0]:g}x{v[1]:g}"
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = "inf" if math.isinf(v) else repr(v)
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"
