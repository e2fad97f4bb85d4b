"""Study orchestration: per-event fits, aggregates and descriptive reports.

Every fit is keyed by ``(stock_id, date, direction, variant, m, link)``.
Events are processed independently (optionally on a process pool) and the
results are reduced in a fixed order, so identical inputs give identical
report bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import statistics
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .config import RunConfig
from .features import (
    CONDITIONAL_COLUMN,
    SUBOPTIMAL_COLUMN,
    EventSkipped,
    FeatureConfig,
    FeatureMatrix,
    build_feature_matrix,
    depth,
    design_columns,
    spread,
    suboptimal_flag,
    trade_views,
    visible_levels,
)
from .glm import DegenerateResponseError, FitOptions, GlmSpec, fit, normal_quantile, odds_effect
from .limits import DEFAULT_CALENDAR, DataIntegrityError, LimitHitEvent, MarketCalendar, compute_limits, detect_first_hit
from .marketdata import STOCK_CLASSES, DailySession, IndexSeries, format_ticks

YIELD_INDEX = 5  # position of yield_k-1 in the coefficient vector (const = 0)
DUMMY_INDEX = 6  # position of the inserted dummy*yield column
YIELD_STEP = 0.001
PREHIT_QUANTITIES = ("V", "yield", "volatility", "spread", "depth")


def _yield_step(direction: str) -> float:
    # a 0.1% move toward the limit
    return YIELD_STEP if direction == "up" else -YIELD_STEP


# -- records ---------------------------------------------------------------

@dataclass
class FitRecord:
    stock_id: str
    date: date
    direction: str
    variant: str
    m: float | None
    link: str
    market_state: str
    stock_class: str
    status: str  # "ok" or "failed"
    reason: str = ""
    n_rows: int = 0
    flags: tuple[str, ...] = ()
    fit: dict | None = None

    @property
    def key(self) -> tuple:
        return (self.stock_id, self.date, self.direction, self.variant, self.m, self.link)

    def coefficient(self, name: str) -> float | None:
        if self.fit is None or name not in self.fit["names"]:
            return None
        return self.fit["coefficients"][self.fit["names"].index(name)]

    def to_dict(self) -> dict:
        return {
            "stock_id": self.stock_id,
            "date": self.date.isoformat(),
            "direction": self.direction,
            "variant": self.variant,
            "m": self.m,
            "link": self.link,
            "market_state": self.market_state,
            "stock_class": self.stock_class,
            "status": self.status,
            "reason": self.reason,
            "n_rows": self.n_rows,
            "flags": list(self.flags),
            "fit": self.fit,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FitRecord":
        return cls(
            stock_id=d["stock_id"],
            date=date.fromisoformat(d["date"]),
            direction=d["direction"],
            variant=d["variant"],
            m=d["m"],
            link=d["link"],
            market_state=d["market_state"],
            stock_class=d["stock_class"],
            status=d["status"],
            reason=d["reason"],
            n_rows=d["n_rows"],
            flags=tuple(d["flags"]),
            fit=d["fit"],
        )


@dataclass
class EventRecord:
    event: LimitHitEvent
    status: str  # "fitted" or "skipped"
    reason: str = ""
    n_rows: int = 0
    dropped: Counter = field(default_factory=Counter)
    suboptimal: tuple[float, float] | None = None


@dataclass
class StudyResult:
    events: list[EventRecord]
    fits: list[FitRecord]
    errors: list[str] = field(default_factory=list)

    @property
    def hits(self) -> list[LimitHitEvent]:
        return [e.event for e in self.events]


# -- per-event work --------------------------------------------------------

def _fit_one(fm: FeatureMatrix, link: str, options: FitOptions, base: dict) -> FitRecord:
    X = fm.design()
    columns = fm.columns
    flags: tuple[str, ...] = ()
    if fm.variant != "base":
        j = columns.index(SUBOPTIMAL_COLUMN if fm.variant == "suboptimal" else CONDITIONAL_COLUMN)
        dummy = [r.is_prev if fm.variant == "suboptimal" else r.ir_prev for r in fm.rows]
        if len(set(dummy)) == 1:
            # constant dummy: the interaction is zero or duplicates yield, so drop it
            X = np.delete(X, j, axis=1)
            columns = columns[:j] + columns[j + 1:]
            flags = ("dummy-inactive",)
    rec = FitRecord(**base, variant=fm.variant, m=fm.m, link=link, status="ok", n_rows=len(fm.rows), flags=flags)
    try:
        result = fit(GlmSpec(link, columns), X, fm.y, options)
    except DegenerateResponseError:
        rec.status, rec.reason = "failed", "degenerate_response"
        return rec
    except (ValueError, np.linalg.LinAlgError) as exc:
        rec.status, rec.reason = "failed", f"error: {exc}"
        return rec
    rec.fit = result.to_dict()
    if not result.converged:
        rec.status, rec.reason = "failed", result.reason
    return rec


def _fit_plan(config: RunConfig, stock_class: str) -> list[tuple[str, float | None, str]]:
    """(variant, m, link) triples to fit for one event; probit only twins the base model."""
    plan = []
    for variant in ("base", "suboptimal", "conditional"):
        if variant not in config.variants:
            continue
        ms = config.m_grid(stock_class) if variant == "conditional" else (None,)
        for m in ms:
            if "logit" in config.links:
                plan.append((variant, m, "logit"))
            if variant == "base" and "probit" in config.links:
                plan.append((variant, m, "probit"))
    return plan


def process_event(event: LimitHitEvent, index: IndexSeries | None, config: RunConfig):
    """Build features and run every planned fit for one event."""
    rec = EventRecord(event, "fitted")
    if not event.opening_hit:
        rec.suboptimal = suboptimal_ratios(event)
    if index is None:
        rec.status, rec.reason = "skipped", "missing_index"
        return rec, []
    fcfg = FeatureConfig(min_rows=config.min_rows, gap_clamp_seconds=config.gap_clamp_seconds)
    try:
        fm = build_feature_matrix(event, index, "base", None, fcfg)
    except EventSkipped as exc:
        rec.status, rec.reason, rec.dropped = "skipped", exc.reason, exc.dropped
        return rec, []
    rec.n_rows, rec.dropped = len(fm.rows), fm.dropped
    options = FitOptions(max_iter=config.max_iter, alpha=config.alpha)
    base = dict(
        stock_id=event.stock_id, date=event.date, direction=event.direction,
        market_state=event.market_state, stock_class=event.stock_class,
    )
    fits = []
    for variant, m, link in _fit_plan(config, event.stock_class):
        fits.append(_fit_one(fm.as_variant(variant, m), link, options, base))
    return rec, fits


_WORKER: dict = {}


def _init_worker(indexes, config):
    _WORKER["indexes"] = indexes
    _WORKER["config"] = config


def _work(event):
    return process_event(event, _WORKER["indexes"].get(event.exchange), _WORKER["config"])


def detect_events(
    sessions: Iterable[DailySession],
    calendar: MarketCalendar = DEFAULT_CALENDAR,
    config: RunConfig = RunConfig(),
) -> tuple[list[LimitHitEvent], list[str]]:
    """First hits of every session in key order; inconsistent sessions are reported, not raised."""
    events, errors = [], []
    for s in sorted(sessions, key=lambda s: s.key):
        limits = compute_limits(s.prev_close, config.limit_rate(s.stock_class), config.rounding)
        try:
            ev = detect_first_hit(s, limits, calendar, config.rounding)
        except (DataIntegrityError, ValueError) as exc:
            errors.append(str(exc))
            continue
        if ev is not None:
            events.append(ev)
    return events, errors


def run_study(
    sessions: Iterable[DailySession],
    indexes: Mapping[str, IndexSeries],
    calendar: MarketCalendar = DEFAULT_CALENDAR,
    config: RunConfig = RunConfig(),
) -> StudyResult:
    """Detect first hits and fit every planned model per event.

    Fit failures are recorded on the :class:`FitRecord` and never abort the
    run. With ``workers > 1`` events are fanned out to a process pool; the
    output order is the event key order either way.
    """
    events, errors = detect_events(sessions, calendar, config)
    indexes = dict(indexes)
    workers = min(config.effective_workers(), max(len(events), 1))
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(indexes, config)) as pool:
            chunk = max(1, len(events) // (4 * workers))
            results = list(pool.map(_work, events, chunksize=chunk))
    else:
        results = [process_event(ev, indexes.get(ev.exchange), config) for ev in events]
    records = [r for r, _ in results]
    fits = [f for _, fs in results for f in fs]
    return StudyResult(records, fits, errors)


# -- descriptive statistics ------------------------------------------------

def suboptimal_ratios(event: LimitHitEvent) -> tuple[float, float]:
    """Share of pre-hit trades (and of their share volume) printed outside the best quotes.

    The hit trade itself is excluded. A trade without a prior quote counts
    as not sub-optimal.
    """
    if event.opening_hit:
        raise ValueError("opening hits have no pre-hit trades")
    views = trade_views(event.prehit_ticks)[:-1]
    flags = [suboptimal_flag(t.price, t.ask, t.bid) if t.bids is not None else 0 for t in views]
    vol = sum(t.volume for t in views)
    w = sum(flags) / len(views)
    wt = sum(t.volume for t, f in zip(views, flags) if f) / vol
    return w, wt


@dataclass(frozen=True)
class PrehitCell:
    stock_class: str
    market_state: str
    direction: str
    quantity: str
    k: int
    n: int
    mean: float
    median: float


def _prehit_values(event: LimitHitEvent, window: int, size_unit_shares: int):
    """Yield (k, quantity, value) for the last ``window`` trades before the hit."""
    views = trade_views(event.prehit_ticks)[:-1]
    J = visible_levels(event.date)
    for k in range(1, min(window, len(views)) + 1):
        t = views[-k]
        yield k, "V", math.log(t.volume / size_unit_shares)
        if len(views) > k:
            y = math.log(t.price) - math.log(views[-k - 1].price)
            yield k, "yield", y
            yield k, "volatility", abs(y)
        if t.bid is not None and t.ask is not None and t.ask > t.bid:
            yield k, "spread", spread(t.ask, t.bid)
        if t.bids or t.asks:
            yield k, "depth", depth(t.bids or (), t.asks or (), event.direction, J)


def prehit_summary(
    events: Iterable[LimitHitEvent], window: int, size_unit_shares: int = 1
) -> list[PrehitCell]:
    """Mean and median of each quantity at each of the last ``window`` trades before the hit.

    ``k=1`` is the trade immediately preceding the hit. Cells with no
    contributing event are absent. Opening hits contribute nothing.
    """
    cells: dict[tuple, list[float]] = defaultdict(list)
    for ev in events:
        if ev.opening_hit:
            continue
        for k, q, v in _prehit_values(ev, window, size_unit_shares):
            cells[(ev.stock_class, ev.market_state, ev.direction, q, k)].append(v)
    order = {q: i for i, q in enumerate(PREHIT_QUANTITIES)}
    out = []
    for key in sorted(cells, key=lambda c: (c[0], c[1], c[2], order[c[3]], c[4])):
        vals = cells[key]
        out.append(PrehitCell(*key, n=len(vals), mean=math.fsum(vals) / len(vals), median=statistics.median(vals)))
    return out


# -- aggregation -----------------------------------------------------------

@dataclass
class CoefficientSummary:
    name: str
    n_pos: int = 0
    n_neg: int = 0
    n_zero: int = 0
    n_fail: int = 0
    mean: float | None = None
    median: float | None = None


@dataclass
class AggregateReport:
    market_state: str
    direction: str
    stock_class: str
    variant: str
    m: float | None
    link: str
    n_events: int
    coefficients: list[CoefficientSummary]
    failures: Counter
    mean_yield: float | None = None
    odds_yield: float | None = None
    mean_b5_b6: float | None = None
    odds_b5_b6: float | None = None

    @property
    def partition(self) -> tuple:
        return (self.market_state, self.direction, self.stock_class, self.variant, self.m, self.link)


def _sign_at(z, crit) -> str:
    if z is None or not math.isfinite(z):
        return "0"
    return "+" if z > crit else "-" if z < -crit else "0"


def _partition_sort_key(p):
    state, direction, cls, variant, m, link = p
    return (state, direction, cls, variant, -1.0 if m is None else m, link)


def aggregate(records: Iterable[FitRecord], alpha: float = 0.05) -> list[AggregateReport]:
    """Significance counts and coefficient means per partition.

    Partitions are market state x direction x stock class x variant x m x
    link. Significance is re-derived from the stored z statistics at
    ``alpha``. Failed fits and coefficients dropped for an inactive dummy
    count as ``n_fail``; they never enter the means.
    """
    crit = normal_quantile(1.0 - alpha / 2.0)
    groups: dict[tuple, list[FitRecord]] = defaultdict(list)
    for r in records:
        groups[(r.market_state, r.direction, r.stock_class, r.variant, r.m, r.link)].append(r)
    reports = []
    for part in sorted(groups, key=_partition_sort_key):
        # sort for permutation invariance of the float reductions
        recs = sorted(groups[part], key=lambda r: (r.stock_id, r.date))
        variant = part[3]
        direction = part[1]
        names = ("const",) + design_columns(variant)
        summaries = [CoefficientSummary(n) for n in names]
        failures: Counter = Counter()
        values: dict[str, list[float]] = defaultdict(list)
        pair_sums = []
        for r in recs:
            if r.status != "ok":
                failures[r.reason] += 1
                for s in summaries:
                    s.n_fail += 1
                continue
            if "dummy-inactive" in r.flags:
                failures["dummy_inactive"] += 1
            fit_names = r.fit["names"]
            for s in summaries:
                if s.name not in fit_names:
                    s.n_fail += 1
                    continue
                j = fit_names.index(s.name)
                sign = _sign_at(r.fit["z"][j], crit)
                if sign == "+":
                    s.n_pos += 1
                elif sign == "-":
                    s.n_neg += 1
                else:
                    s.n_zero += 1
                values[s.name].append(r.fit["coefficients"][j])
            if variant != "base" and len(fit_names) == len(names):
                pair_sums.append(r.fit["coefficients"][YIELD_INDEX] + r.fit["coefficients"][DUMMY_INDEX])
        for s in summaries:
            v = values[s.name]
            if v:
                s.mean = math.fsum(v) / len(v)
                s.median = statistics.median(v)
        rep = AggregateReport(*part, n_events=len(recs), coefficients=summaries, failures=failures)
        ys = summaries[YIELD_INDEX]
        dx = _yield_step(direction)
        if ys.mean is not None:
            rep.mean_yield = ys.mean
            rep.odds_yield = odds_effect(ys.mean, dx)
        if pair_sums:
            rep.mean_b5_b6 = math.fsum(pair_sums) / len(pair_sums)
            rep.odds_b5_b6 = odds_effect(rep.mean_b5_b6, dx)
        reports.append(rep)
    return reports


# -- logit vs probit accuracy ----------------------------------------------

@dataclass
class RobustnessStats:
    deltas: dict[tuple, float]  # (stock_id, date, direction) -> delta accuracy
    labels: dict[tuple, tuple[str, str]]  # same key -> (market_state, direction)
    unpaired: list[tuple]
    bin_width: float
    exact: dict[tuple, Fraction] = field(default_factory=dict, repr=False)

    def histogram(self, keys: Iterable[tuple] | None = None) -> list[tuple[float, float, int, float]]:
        """``(lo, hi, count, density)`` rows over the occupied bin range."""
        keys = list(self.deltas if keys is None else keys)
        if not keys:
            return []
        w = Fraction(str(self.bin_width))
        counts = Counter(math.floor(self.exact[k] / w) for k in keys)
        n = len(keys)
        rows = []
        for b in range(min(counts), max(counts) + 1):
            c = counts.get(b, 0)
            rows.append((float(b * w), float((b + 1) * w), c, c / (n * float(w))))
        return rows

    def mean_abs(self) -> float:
        if not self.deltas:
            return float("nan")
        return math.fsum(abs(v) for v in self.deltas.values()) / len(self.deltas)


def _correct_count(fit_dict: dict) -> int:
    return round(fit_dict["accuracy"] * fit_dict["n_obs"])


def robustness_delta(records: Iterable[FitRecord], bin_width: float = 0.005) -> RobustnessStats:
    """Accuracy difference logit minus probit for base fits paired on the same event.

    Both fits must have converged. Differences are kept exact (as ratios of
    correct-classification counts) so histogram binning has no rounding.
    """
    logit, probit = {}, {}
    labels = {}
    for r in records:
        if r.variant != "base":
            continue
        ek = (r.stock_id, r.date, r.direction)
        labels[ek] = (r.market_state, r.direction)
        if r.status == "ok":
            (logit if r.link == "logit" else probit)[ek] = r
    stats = RobustnessStats({}, {}, [], bin_width)
    for ek in sorted(labels):
        if ek in logit and ek in probit:
            a, b = logit[ek].fit, probit[ek].fit
            exact = Fraction(_correct_count(a) - _correct_count(b), a["n_obs"])
            stats.exact[ek] = exact
            stats.deltas[ek] = float(exact)
            stats.labels[ek] = labels[ek]
        else:
            stats.unpaired.append(ek)
    return stats


# -- report files ----------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return str(x)


def _mean_median(mean, median) -> str:
    if mean is None:
        return ""
    return f"{mean:.4g}({median:.4g})"


EVENT_COLUMNS = (
    "stock_id", "exchange", "date", "direction", "hit_index", "hit_time", "hit_price",
    "prev_close", "up_limit", "down_limit", "stock_class", "market_state", "opening_hit",
)
STUDY_COLUMNS = ("status", "reason", "n_rows", "dropped", "W", "WT", "delta_accuracy")


def event_row(ev: LimitHitEvent) -> list[str]:
    return [
        ev.stock_id, ev.exchange, ev.date.isoformat(), ev.direction, str(ev.hit_index),
        ev.prehit_ticks[-1].timestamp.strftime("%H:%M:%S"), format_ticks(ev.hit_price),
        format_ticks(ev.prev_close), format_ticks(ev.limits.up_limit), format_ticks(ev.limits.down_limit),
        ev.stock_class, ev.market_state, "1" if ev.opening_hit else "0",
    ]


def write_events_csv(path, events: Sequence[LimitHitEvent]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow(event_row(ev))


def _write_study_events(path, result: StudyResult, robust: RobustnessStats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EVENT_COLUMNS + STUDY_COLUMNS)
        for rec in result.events:
            ev = rec.event
            dropped = ";".join(f"{k}:{v}" for k, v in sorted(rec.dropped.items()))
            wv, wt = rec.suboptimal if rec.suboptimal else (None, None)
            delta = robust.deltas.get((ev.stock_id, ev.date, ev.direction))
            w.writerow(event_row(ev) + [rec.status, rec.reason, str(rec.n_rows), dropped, _fmt(wv), _fmt(wt), _fmt(delta)])


def write_fits_jsonl(path, fits: Iterable[FitRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in fits:
            f.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_fits_jsonl(path) -> list[FitRecord]:
    with open(path, encoding="utf-8") as f:
        return [FitRecord.from_dict(json.loads(line)) for line in f if line.strip()]


AGGREGATE_COLUMNS = (
    "market_state", "direction", "stock_class", "link", "m", "coefficient", "n_events",
    "n_pos", "n_neg", "n_zero", "n_fail", "mean", "median", "mean_median",
    "mean_yield", "odds_yield", "mean_b5_b6", "odds_b5_b6", "failures",
)


def write_aggregate_csv(path, reports: Iterable[AggregateReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for rep in reports:
            failures = ";".join(f"{k}:{v}" for k, v in sorted(rep.failures.items()))
            for s in rep.coefficients:
                w.writerow([
                    rep.market_state, rep.direction, rep.stock_class, rep.link, _fmt(rep.m), s.name,
                    rep.n_events, s.n_pos, s.n_neg, s.n_zero, s.n_fail, _fmt(s.mean), _fmt(s.median),
                    _mean_median(s.mean, s.median), _fmt(rep.mean_yield), _fmt(rep.odds_yield),
                    _fmt(rep.mean_b5_b6), _fmt(rep.odds_b5_b6), failures,
                ])


def write_prehit_csv(path, cells: Iterable[PrehitCell]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("stock_class", "market_state", "direction", "quantity", "k", "n", "mean", "median", "mean_median"))
        for c in cells:
            w.writerow([c.stock_class, c.market_state, c.direction, c.quantity, c.k, c.n,
                        _fmt(c.mean), _fmt(float(c.median)), _mean_median(c.mean, c.median)])


def write_suboptimal_csv(path, records: Iterable[EventRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("stock_id", "date", "direction", "market_state", "stock_class", "W", "WT"))
        for rec in records:
            if rec.suboptimal is None:
                continue
            ev = rec.event
            w.writerow([ev.stock_id, ev.date.isoformat(), ev.direction, ev.market_state, ev.stock_class,
                        _fmt(rec.suboptimal[0]), _fmt(rec.suboptimal[1])])


def write_delta_hist_csv(path, robust: RobustnessStats) -> None:
    groups: dict[tuple, list] = defaultdict(list)
    for k, lab in robust.labels.items():
        groups[lab].append(k)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("market_state", "direction", "bin_lo", "bin_hi", "count", "density"))
        for lab in [("all", "all")] + sorted(groups):
            keys = None if lab == ("all", "all") else groups[lab]
            for lo, hi, c, dens in robust.histogram(keys):
                w.writerow([lab[0], lab[1], _fmt(lo), _fmt(hi), c, _fmt(dens)])


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def run_counts(result: StudyResult) -> dict:
    per_variant: dict[str, Counter] = defaultdict(Counter)
    for r in result.fits:
        per_variant[f"{r.variant}/{r.link}"][r.status] += 1
    skipped = Counter(e.reason for e in result.events if e.status == "skipped")
    return {
        "events": len(result.events),
        "events_fitted": sum(e.status == "fitted" for e in result.events),
        "events_skipped": dict(sorted(skipped.items())),
        "session_errors": len(result.errors),
        "fits": {k: dict(sorted(v.items())) for k, v in sorted(per_variant.items())},
    }


def write_manifest(path, config: RunConfig, counts: dict, input_paths: Sequence = ()) -> None:
    inputs = {os.path.basename(p): file_digest(p) for p in sorted(input_paths, key=os.path.basename)}
    manifest = {
        # paths, worker count and output location never change results
        "config": config.semantic_dict(),
        "config_hash": config.digest(),
        "inputs": inputs,
        "versions": {
            "limitlens": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "counts": counts,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def aggregate_by_variant(fits: Sequence[FitRecord], config: RunConfig) -> dict[str, list[AggregateReport]]:
    return {v: aggregate([r for r in fits if r.variant == v], config.alpha) for v in config.variants}


def write_aggregates(out_dir, fits: Sequence[FitRecord], config: RunConfig) -> list[str]:
    written = []
    for variant, reports in aggregate_by_variant(fits, config).items():
        path = os.path.join(out_dir, f"aggregate_{variant}.csv")
        write_aggregate_csv(path, reports)
        written.append(path)
    return written


def write_reports(out_dir, result: StudyResult, config: RunConfig, input_paths: Sequence = ()) -> list[str]:
    """Write the full report set for a study into ``out_dir``; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    robust = robustness_delta(result.fits, config.hist_bin_width)
    paths = {name: os.path.join(out_dir, name) for name in (
        "events.csv", "fits.jsonl", "prehit_summary.csv", "suboptimal.csv",
        "delta_accuracy_hist.csv", "run_manifest.json",
    )}
    _write_study_events(paths["events.csv"], result, robust)
    write_fits_jsonl(paths["fits.jsonl"], result.fits)
    written = write_aggregates(out_dir, result.fits, config)
    cells = []
    for cls in STOCK_CLASSES:
        evs = [e for e in result.hits if e.stock_class == cls]
        cells += prehit_summary(evs, config.window(cls), config.size_unit_shares)
    write_prehit_csv(paths["prehit_summary.csv"], cells)
    write_suboptimal_csv(paths["suboptimal.csv"], result.events)
    write_delta_hist_csv(paths["delta_accuracy_hist.csv"], robust)
    write_manifest(paths["run_manifest.json"], config, run_counts(result), input_paths)
    return sorted(list(paths.values()) + written)
