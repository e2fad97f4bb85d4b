"""Run configuration: defaults, INI round-trip and hashing."""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import os
import typing
from dataclasses import dataclass, fields, replace

ENV_VAR = "LIMITLENS_CONFIG"

# config keys grouped into INI sections
_SECTIONS = {
    "input": ("data_dir", "tick_files", "metadata_files", "index_files", "calendar"),
    "output": ("output_dir",),
    "study": (
        "alpha", "limit_rate_common", "limit_rate_st", "m_grid_common", "m_grid_st",
        "window_common", "window_st", "min_rows", "rounding", "gap_clamp_seconds",
        "variants", "links", "m", "hist_bin_width", "size_unit_shares", "max_iter", "workers",
    ),
    "synth": ("seed", "stocks", "days", "start_date", "st_fraction", "force"),
}
# keys that never change results and are left out of the reproducibility hash
_NON_SEMANTIC = {"output_dir", "workers", "force", "data_dir", "tick_files", "metadata_files", "index_files"}


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = ""
    tick_files: tuple[str, ...] = ()
    metadata_files: tuple[str, ...] = ()
    index_files: tuple[str, ...] = ()
    calendar: str = ""
    output_dir: str = "limitlens_run"
    alpha: float = 0.05
    limit_rate_common: float = 10.0
    limit_rate_st: float = 5.0
    m_grid_common: tuple[float, ...] = (5.0, 6.0, 7.0, 8.0, 9.0)
    m_grid_st: tuple[float, ...] = (2.5, 3.0, 3.5, 4.0, 4.5)
    window_common: int = 16
    window_st: int = 20
    min_rows: int = 30
    rounding: str = "half_away_from_zero"
    gap_clamp_seconds: float | None = None
    variants: tuple[str, ...] = ("base", "suboptimal", "conditional")
    links: tuple[str, ...] = ("logit", "probit")
    m: tuple[float, ...] = ()
    hist_bin_width: float = 0.005
    size_unit_shares: int = 1
    max_iter: int = 100
    workers: int = 0
    seed: int = 0
    stocks: int = 5
    days: int = 20
    start_date: str = "2008-10-06"
    st_fraction: float = 0.0
    force: bool = False

    def limit_rate(self, stock_class: str) -> float:
        return self.limit_rate_common if stock_class == "common" else self.limit_rate_st

    def m_grid(self, stock_class: str) -> tuple[float, ...]:
        grid = self.m_grid_common if stock_class == "common" else self.m_grid_st
        if self.m:
            grid = tuple(v for v in grid if v in self.m)
        return grid

    def window(self, stock_class: str) -> int:
        return self.window_common if stock_class == "common" else self.window_st

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def semantic_dict(self) -> dict:
        return {k: v for k, v in to_dict(self).items() if k not in _NON_SEMANTIC}

    def digest(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _field_types() -> dict[str, object]:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in fields(RunConfig)}


def parse_value(name: str, text: str):
    """Parse one config value from its text form according to the field's type."""
    tp = _field_types()[name]
    text = text.strip()
    origin = typing.get_origin(tp)
    if origin is tuple:
        (inner, _) = typing.get_args(tp)
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(inner(t) for t in items)
    if tp is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off", ""):
            return False
        raise ValueError(f"{name}: not a boolean: {text!r}")
    if tp == (float | None):
        return None if text.lower() in ("", "none") else float(text)
    return tp(text)


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_dict(config: RunConfig) -> dict:
    out = {}
    for f in fields(config):
        v = getattr(config, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def dumps(config: RunConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for section, keys in _SECTIONS.items():
        cp[section] = {k: format_value(getattr(config, k)) for k in keys}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str, base: RunConfig = RunConfig()) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    known = _field_types()
    updates = {}
    for section in cp.sections():
        for key, raw in cp[section].items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r} in [{section}]")
            updates[key] = parse_value(key, raw)
    return replace(base, **updates)


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        return loads(f.read())


def save(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(config))
