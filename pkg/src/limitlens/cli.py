"""``limitlens`` command line: synth, detect, run and report subcommands.

Configuration is layered: built-in defaults, then the file named by
``--config`` (or the ``LIMITLENS_CONFIG`` environment variable), then any
``--key value`` flags.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from collections import Counter
from dataclasses import fields, replace
from datetime import date

from . import __version__
from . import config as cfgmod
from .config import RunConfig
from .limits import DEFAULT_CALENDAR, MarketCalendar
from .marketdata import (
    MarketDataError,
    parse_index_file,
    parse_metadata_file,
    parse_tick_file,
    write_index_file,
    write_metadata_file,
    write_tick_file,
)
from . import pipeline
from .synth import SynthConfig, gen_sessions

log = logging.getLogger("limitlens")

# extra spellings for a few list-valued keys
_ALIASES = {"variants": ("--variant",), "links": ("--link",)}


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _config_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="config file (default: $%s)" % cfgmod.ENV_VAR)
    for f in fields(RunConfig):
        names = [f"--{f.name.replace('_', '-')}"]
        if "_" in f.name:
            names.append(f"--{f.name}")
        names += _ALIASES.get(f.name, ())
        if f.type in (bool, "bool"):
            p.add_argument(*names, dest=f.name, action="store_true", default=argparse.SUPPRESS)
        else:
            p.add_argument(*names, dest=f.name, metavar="VALUE", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _config_flags()
    parser = argparse.ArgumentParser(prog="limitlens", description="Limit-hit event study toolkit.")
    parser.add_argument("--version", action="version", version=f"limitlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[parent], help="write a synthetic data tree with known hits")
    sub.add_parser("detect", parents=[parent], help="detect first limit hits and write events.csv")
    sub.add_parser("run", parents=[parent], help="run the full study and write all reports")
    sub.add_parser("report", parents=[parent], help="re-aggregate an existing fits.jsonl")
    return parser


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    path = getattr(args, "config", None) or environ.get(cfgmod.ENV_VAR)
    config = cfgmod.load(path) if path else RunConfig()
    updates = {}
    for f in fields(RunConfig):
        if f.name in vars(args):
            value = getattr(args, f.name)
            updates[f.name] = value if isinstance(value, bool) else cfgmod.parse_value(f.name, value)
    return replace(config, **updates)


# -- inputs ----------------------------------------------------------------

def input_paths(config: RunConfig) -> tuple[list[str], list[str], list[str]]:
    ticks, meta, index = list(config.tick_files), list(config.metadata_files), list(config.index_files)
    if config.data_dir:
        d = config.data_dir
        if os.path.isfile(os.path.join(d, "ticks.csv")):
            ticks.append(os.path.join(d, "ticks.csv"))
        if os.path.isfile(os.path.join(d, "sessions.csv")):
            meta.append(os.path.join(d, "sessions.csv"))
        index += sorted(glob.glob(os.path.join(d, "index_*.csv")))
    return ticks, meta, index


def _parse(path, fn, *args):
    try:
        with open(path, "rb") as f:
            return fn(f, *args)
    except MarketDataError as exc:
        where = f"{path}:{exc.line}" if exc.line else path
        raise CliError(f"{where}: {exc.args[0]}") from None
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None


def load_inputs(config: RunConfig):
    """Sessions, index series and the list of files read."""
    ticks, meta, index = input_paths(config)
    if not ticks:
        raise CliError("no sessions found", code=2)
    metadata = {}
    for path in meta:
        for key, value in _parse(path, parse_metadata_file).items():
            if key in metadata:
                raise CliError(f"{path}: duplicate metadata for {key[0]} {key[1]}")
            metadata[key] = value
    sessions = {}
    for path in ticks:
        result = _parse(path, parse_tick_file, metadata)
        rep = result.report
        if rep.rows_rejected:
            reasons = ", ".join(f"{k}={v}" for k, v in sorted(rep.rejected.items()))
            log.warning("%s: rejected %d of %d rows (%s)", path, rep.rows_rejected, rep.rows_total, reasons)
        for s in result.sessions:
            if s.key in sessions:
                raise CliError(f"{path}: session {s.stock_id} {s.date} appears in more than one file")
            sessions[s.key] = s
    if not sessions:
        raise CliError("no sessions found", code=2)
    indexes = {}
    for path in index:
        series = _parse(path, parse_index_file)
        if series.exchange in indexes:
            raise CliError(f"{path}: second index file for {series.exchange}")
        indexes[series.exchange] = series
    calendar = MarketCalendar.load(config.calendar) if config.calendar else DEFAULT_CALENDAR
    return list(sessions.values()), indexes, calendar, ticks + meta + index


# -- subcommands -----------------------------------------------------------

def cmd_synth(config: RunConfig) -> int:
    out = config.output_dir
    if os.path.isdir(out) and os.listdir(out) and not config.force:
        raise CliError(f"{out}: output directory is not empty (use --force to overwrite)")
    os.makedirs(out, exist_ok=True)
    sc = SynthConfig(
        seed=config.seed, n_stocks=config.stocks, n_days=config.days,
        start_date=date.fromisoformat(config.start_date), st_fraction=config.st_fraction,
    )
    data = gen_sessions(sc)
    with open(os.path.join(out, "ticks.csv"), "w", newline="", encoding="utf-8") as f:
        write_tick_file(data.sessions, f)
    with open(os.path.join(out, "sessions.csv"), "w", newline="", encoding="utf-8") as f:
        write_metadata_file(data.sessions, f)
    for exchange, series in sorted(data.indexes.items()):
        with open(os.path.join(out, f"index_{exchange}.csv"), "w", newline="", encoding="utf-8") as f:
            write_index_file(series, f)
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as f:
        data.write_manifest(f, sc)
    log.info("wrote %d sessions with %d injected hits to %s", len(data.sessions), len(data.hits), out)
    return 0


def _state_direction_counts(events) -> str:
    counts = Counter((e.market_state, e.direction) for e in events)
    return "\n".join(f"  {s:8s} {d:5s} {n}" for (s, d), n in sorted(counts.items()))


def cmd_detect(config: RunConfig) -> int:
    sessions, _, calendar, _ = load_inputs(config)
    events, errors = pipeline.detect_events(sessions, calendar, config)
    for msg in errors:
        log.warning("skipped session: %s", msg)
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "events.csv")
    pipeline.write_events_csv(path, events)
    print(f"{len(events)} first hits in {len(sessions)} sessions -> {path}")
    if events:
        print(_state_direction_counts(events))
    return 0


def cmd_run(config: RunConfig) -> int:
    sessions, indexes, calendar, paths = load_inputs(config)
    log.info("%d sessions, %d index series; running with %d worker(s)",
             len(sessions), len(indexes), config.effective_workers())
    result = pipeline.run_study(sessions, indexes, calendar, config)
    for msg in result.errors:
        log.warning("skipped session: %s", msg)
    written = pipeline.write_reports(config.output_dir, result, config, paths)
    counts = pipeline.run_counts(result)
    print(f"{counts['events']} events, {counts['events_fitted']} fitted, "
          f"{len(result.fits)} fits -> {config.output_dir} ({len(written)} files)")
    for name, by_status in counts["fits"].items():
        print(f"  {name:20s} " + " ".join(f"{k}={v}" for k, v in by_status.items()))
    return 0


def cmd_report(config: RunConfig) -> int:
    path = os.path.join(config.output_dir, "fits.jsonl")
    if not os.path.isfile(path):
        raise CliError(f"{path}: not found (run `limitlens run` first)")
    fits = pipeline.read_fits_jsonl(path)
    pipeline.write_aggregates(config.output_dir, fits, config)
    robust = pipeline.robustness_delta(fits, config.hist_bin_width)
    pipeline.write_delta_hist_csv(os.path.join(config.output_dir, "delta_accuracy_hist.csv"), robust)
    for variant, reports in pipeline.aggregate_by_variant(fits, config).items():
        print(f"[{variant}] yield coefficient (+/-/0/fail)")
        for rep in reports:
            s = rep.coefficients[pipeline.YIELD_INDEX]
            m = "" if rep.m is None else f" m={rep.m:g}"
            print(f"  {rep.market_state:8s} {rep.direction:5s} {rep.stock_class:8s} {rep.link:7s}{m}: "
                  f"{s.n_pos}/{s.n_neg}/{s.n_zero}/{s.n_fail}")
    if robust.deltas:
        print(f"mean |dA| = {robust.mean_abs():.4f} over {len(robust.deltas)} paired events")
    return 0


COMMANDS = {"synth": cmd_synth, "detect": cmd_detect, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except CliError as exc:
        print(f"limitlens: error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"limitlens: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
