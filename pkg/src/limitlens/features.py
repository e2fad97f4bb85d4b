"""Per-trade regressors and responses for the limit-hit logit models.

Prices are integer ticks throughout, so every midpoint comparison is done as
``2 * p`` against ``a + b`` in exact integer arithmetic. The quote attached
to a trade is always the book snapshot of the tick immediately preceding it
in the session stream.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from fractions import Fraction
from typing import IO, Sequence

import numpy as np

from .limits import LimitHitEvent
from .marketdata import TICKS_PER_UNIT, IndexSeries, Level, TradeTick

VARIANTS = ("base", "suboptimal", "conditional")

BASE_COLUMNS = (
    "dT_k",
    "V_k-1*IBS_k-1",
    "V_k-2*IBS_k-2",
    "V_k-3*IBS_k-3",
    "yield_k-1",
    "MKT_k-1",
    "MKT_k-2",
    "MKT_k-3",
    "spread_k-1",
    "depth_k-1",
)
SUBOPTIMAL_COLUMN = "IS_k-1*yield_k-1"
CONDITIONAL_COLUMN = "IR_k-1*yield_k-1"

SAMPLE_START = time(9, 33, 0)
DEEP_BOOK_FROM = date(2003, 12, 5)
LN_TICKS_PER_UNIT = math.log(TICKS_PER_UNIT)

# Continuous-auction minutes; index lags step over the lunch break on this grid.
_SESSIONS = ((time(9, 30), time(11, 30)), (time(13, 0), time(15, 0)))


def design_columns(variant: str) -> tuple[str, ...]:
    """Regressor names (intercept excluded) for a model variant."""
    if variant == "base":
        return BASE_COLUMNS
    extra = {"suboptimal": SUBOPTIMAL_COLUMN, "conditional": CONDITIONAL_COLUMN}[variant]
    return BASE_COLUMNS[:5] + (extra,) + BASE_COLUMNS[5:]


def _sign(direction: str) -> int:
    if direction == "up":
        return 1
    if direction == "down":
        return -1
    raise ValueError(f"direction must be 'up' or 'down', not {direction!r}")


def response_y(p_k, p_prev, a_k, b_k, direction: str) -> int:
    """1 if trade k moved toward the limit, including the at-price tie break."""
    s = _sign(direction)
    if s * p_k > s * p_prev:
        return 1
    if p_k == p_prev and s * 2 * p_k > s * (a_k + b_k):
        return 1
    return 0


def ibs(p, a, b, direction: str) -> int:
    """Trade direction relative to the quote midpoint; the midpoint itself maps to -1."""
    s = _sign(direction)
    return 1 if s * 2 * p > s * (a + b) else -1


def log_size(volume) -> float:
    if volume < 1:
        raise ValueError("log_size needs a positive trade volume")
    return math.log(volume)


def yield_and_volatility(p_k, p_prev) -> tuple[float, float]:
    y = math.log(p_k) - math.log(p_prev)
    return y, abs(y)


def spread(a, b) -> float:
    """Relative bid-ask spread ``2(a-b)/(a+b)``."""
    return 2 * (a - b) / (a + b)


def depth(bid_levels: Sequence[Level], ask_levels: Sequence[Level], direction: str, J: int = 5) -> float:
    """Signed log of the visible value imbalance between bid and ask sides.

    Levels are ``(price_ticks, volume)``; value is in currency units. Levels
    past ``J`` are ignored and absent ones contribute nothing. Exact balance
    returns 0.
    """
    if J not in (3, 5):
        raise ValueError("J must be 3 or 5")
    if not bid_levels and not ask_levels:
        raise ValueError("depth needs at least one book level")
    imbalance = sum(p * v for p, v in bid_levels[:J]) - sum(p * v for p, v in ask_levels[:J])
    imbalance *= _sign(direction)
    if imbalance == 0:
        return 0.0
    mag = math.log(abs(imbalance)) - LN_TICKS_PER_UNIT
    return mag if imbalance > 0 else -mag


def visible_levels(d: date) -> int:
    return 3 if d < DEEP_BOOK_FROM else 5


def _minute_grid(d: date) -> list[datetime]:
    out = []
    for start, end in _SESSIONS:
        t = datetime.combine(d, start)
        stop = datetime.combine(d, end)
        while t <= stop:
            out.append(t)
            t += timedelta(minutes=1)
    return out


_GRID_CACHE: dict[date, tuple[list[datetime], dict[datetime, int]]] = {}


def _grid(d: date):
    g = _GRID_CACHE.get(d)
    if g is None:
        minutes = _minute_grid(d)
        g = (minutes, {m: i for i, m in enumerate(minutes)})
        _GRID_CACHE[d] = g
    return g


def mkt_lags(trade_time: datetime, index: IndexSeries, lags: int = 3) -> tuple[float, ...] | None:
    """One-minute index log-returns over the last completed bars, most recent first.

    A bar stamped ``HH:MM`` is the level at ``HH:MM:00`` and counts as
    completed only if that instant is strictly before ``trade_time``.
    Returns ``None`` when any needed bar is missing.
    """
    minutes, pos = _grid(trade_time.date())
    floor = trade_time.replace(second=0, microsecond=0)
    if floor == trade_time:
        floor -= timedelta(minutes=1)
    # snap into the grid: last grid minute <= floor
    i = pos.get(floor)
    if i is None:
        earlier = [j for j, m in enumerate(minutes) if m <= floor]
        if not earlier:
            return None
        i = earlier[-1]
    if i < lags:
        return None
    levels = []
    for j in range(i, i - lags - 1, -1):
        lv = index.level_at(minutes[j])
        if lv is None:
            return None
        levels.append(lv)
    return tuple(math.log(levels[n]) - math.log(levels[n + 1]) for n in range(lags))


def suboptimal_flag(p_k, a_k, b_k) -> int:
    """1 if the print is strictly outside the prevailing best quotes.

    A missing side (``None``) cannot be breached.
    """
    if b_k is not None and p_k < b_k:
        return 1
    if a_k is not None and p_k > a_k:
        return 1
    return 0


def excursion(p_prev, prev_close) -> float:
    return (p_prev - prev_close) / prev_close


def excursion_dummy(p_prev, prev_close, direction: str, m) -> int:
    """1 once the previous trade has moved at least ``m`` percent toward the limit.

    Compared exactly: ``100 * (p - P) >= m * P`` for up, mirrored for down.
    """
    s = _sign(direction)
    m = Fraction(str(m))
    lhs = 100 * s * (Fraction(str(p_prev)) - Fraction(str(prev_close)))
    return 1 if lhs >= m * Fraction(str(prev_close)) else 0


@dataclass(frozen=True)
class FeatureRow:
    k: int
    y: int
    dt: float
    dirvol_lags: tuple[float, float, float]
    yield_prev: float
    mkt_lags: tuple[float, float, float]
    spread_prev: float
    depth_prev: float
    is_prev: int
    ir_prev: int
    r_excursion: float


@dataclass(frozen=True)
class FeatureConfig:
    min_rows: int = 30
    gap_clamp_seconds: float | None = None
    levels: int | None = None
    sample_start: time = SAMPLE_START


class EventSkipped(Exception):
    """Raised when an event cannot yield a usable regression matrix."""

    def __init__(self, reason: str, detail: str = "", dropped: Counter | None = None):
        self.reason = reason
        self.dropped = dropped or Counter()
        super().__init__(f"{reason}: {detail}" if detail else reason)


@dataclass
class FeatureMatrix:
    event: LimitHitEvent
    rows: list[FeatureRow]
    variant: str
    m: float | None = None
    dropped: Counter = field(default_factory=Counter)
    # price of trade k-1 for each row, kept so the excursion dummy can be re-derived per m
    prev_prices: tuple[int, ...] = field(default=(), repr=False)

    def as_variant(self, variant: str, m=None) -> "FeatureMatrix":
        """Same rows under another model variant, recomputing the excursion dummy for ``m``."""
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if (variant == "conditional") != (m is not None):
            raise ValueError("m is required for, and only for, the conditional variant")
        rows = self.rows
        if m is not None:
            ev = self.event
            rows = [
                replace(r, ir_prev=excursion_dummy(p, ev.prev_close, ev.direction, m))
                for r, p in zip(self.rows, self.prev_prices)
            ]
        return FeatureMatrix(self.event, rows, variant, m, self.dropped, self.prev_prices)

    @property
    def columns(self) -> tuple[str, ...]:
        return design_columns(self.variant)

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.rows], dtype=float)

    def design(self) -> np.ndarray:
        """Regressor matrix without the intercept column."""
        n = len(self.rows)
        X = np.empty((n, len(self.columns)))
        for i, r in enumerate(self.rows):
            base = (r.dt, *r.dirvol_lags, r.yield_prev, *r.mkt_lags, r.spread_prev, r.depth_prev)
            if self.variant == "base":
                X[i] = base
            else:
                dummy = r.is_prev if self.variant == "suboptimal" else r.ir_prev
                X[i] = base[:5] + (dummy * r.yield_prev,) + base[5:]
        return X

    def to_csv(self, dest: IO[str]) -> None:
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(("k", "Y_k") + self.columns)
        for r, x in zip(self.rows, self.design()):
            w.writerow([r.k, r.y] + [repr(float(v)) for v in x])


@dataclass(frozen=True)
class _TradeView:
    """A trade with the quote prevailing just before it."""

    tick_index: int
    time: datetime
    price: int
    volume: int
    bids: tuple[Level, ...] | None
    asks: tuple[Level, ...] | None

    @property
    def bid(self):
        return self.bids[0][0] if self.bids else None

    @property
    def ask(self):
        return self.asks[0][0] if self.asks else None


def trade_views(ticks: Sequence[TradeTick]) -> list[_TradeView]:
    out = []
    for i, t in enumerate(ticks):
        if t.volume <= 0:
            continue
        prev = ticks[i - 1] if i > 0 else None
        out.append(_TradeView(
            i, t.timestamp, t.price, t.volume,
            prev.bid_levels if prev is not None else None,
            prev.ask_levels if prev is not None else None,
        ))
    return out


def build_feature_matrix(
    event: LimitHitEvent,
    index: IndexSeries,
    variant: str = "base",
    m=None,
    config: FeatureConfig = FeatureConfig(),
) -> FeatureMatrix:
    """Regression rows for every trade after the sample start through the hit.

    Lags only reach back to trades inside the sample window, so the first
    three sampled trades are burn-in. Rows lacking any quote or index bar are
    dropped and tallied in ``FeatureMatrix.dropped``.

    Raises :class:`EventSkipped` for opening hits and for events left with
    fewer than ``config.min_rows`` rows.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if (variant == "conditional") != (m is not None):
        raise ValueError("m is required for, and only for, the conditional variant")
    if event.opening_hit:
        raise EventSkipped("opening_hit")

    direction = event.direction
    J = config.levels or visible_levels(event.date)
    start = datetime.combine(event.date, config.sample_start)
    trades = [t for t in trade_views(event.prehit_ticks) if t.time > start]
    dropped: Counter = Counter()
    rows: list[FeatureRow] = []
    prev_prices: list[int] = []

    def quoted(t):
        return t.bid is not None and t.ask is not None and t.ask > t.bid

    for j in range(3, len(trades)):
        cur, p1, p2, p3 = trades[j], trades[j - 1], trades[j - 2], trades[j - 3]
        if not quoted(cur):
            dropped["missing_quote"] += 1
            continue
        if not (quoted(p1) and quoted(p2) and quoted(p3)):
            dropped["missing_lag_quote"] += 1
            continue
        mkt = mkt_lags(cur.time, index)
        if mkt is None:
            dropped["missing_index_bar"] += 1
            continue
        dt = (cur.time - p1.time).total_seconds()
        if config.gap_clamp_seconds is not None:
            dt = min(dt, config.gap_clamp_seconds)
        dirvol = tuple(
            math.log(t.volume) * ibs(t.price, t.ask, t.bid, direction) for t in (p1, p2, p3)
        )
        rows.append(FeatureRow(
            k=j,
            y=response_y(cur.price, p1.price, cur.ask, cur.bid, direction),
            dt=dt,
            dirvol_lags=dirvol,
            yield_prev=math.log(p1.price) - math.log(p2.price),
            mkt_lags=mkt,
            spread_prev=spread(p1.ask, p1.bid),
            depth_prev=depth(p1.bids, p1.asks, direction, J),
            is_prev=suboptimal_flag(p1.price, p1.ask, p1.bid),
            ir_prev=excursion_dummy(p1.price, event.prev_close, direction, m) if m is not None else 0,
            r_excursion=excursion(p1.price, event.prev_close),
        ))
        prev_prices.append(p1.price)

    if len(rows) < config.min_rows:
        raise EventSkipped("too_few_rows", f"{len(rows)} < {config.min_rows}", dropped)
    return FeatureMatrix(event, rows, variant, m, dropped, tuple(prev_prices))
