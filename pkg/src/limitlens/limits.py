"""Daily price limits, first-hit detection and market-state labelling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date
from fractions import Fraction
from typing import Sequence

from .marketdata import DailySession, TradeTick

ROUNDING_MODES = ("half_away_from_zero", "half_even")


class DataIntegrityError(ValueError):
    pass


@dataclass(frozen=True)
class LimitPrices:
    up_limit: int
    down_limit: int


def round_ticks(x: Fraction, mode: str = "half_away_from_zero") -> int:
    """Round an exact rational tick amount to an integer tick."""
    if mode == "half_even":
        return round(x)
    if mode != "half_away_from_zero":
        raise ValueError(f"unknown rounding mode {mode!r}")
    sign = -1 if x < 0 else 1
    return sign * int((abs(x) + Fraction(1, 2)).__floor__())


def compute_limits(prev_close: int, rate, rounding: str = "half_away_from_zero") -> LimitPrices:
    """Up/down limits for the next session from the previous close in ticks.

    ``rate`` is a percentage (10 or 5). Arithmetic is exact; only the final
    rounding to the tick grid loses information.

    >>> compute_limits(1007, 10)
    LimitPrices(up_limit=1108, down_limit=906)
    """
    if prev_close <= 0:
        raise ValueError("prev_close must be positive")
    r = Fraction(str(rate)) / 100
    up = round_ticks(prev_close * (1 + r), rounding)
    down = round_ticks(prev_close * (1 - r), rounding)
    return LimitPrices(up, down)


@dataclass(frozen=True)
class MarketCalendar:
    """Ordered, non-overlapping ``(start, end, state)`` intervals, inclusive."""

    intervals: tuple[tuple[date, date, str], ...]

    def __post_init__(self):
        prev_end = None
        for start, end, state in self.intervals:
            if state not in ("bullish", "bearish"):
                raise ValueError(f"unknown market state {state!r}")
            if end < start:
                raise ValueError(f"interval {start}..{end} ends before it starts")
            if prev_end is not None and (start - prev_end).days != 1:
                raise ValueError(f"calendar not contiguous at {start}")
            prev_end = end

    @classmethod
    def from_entries(cls, entries: Sequence[dict]) -> "MarketCalendar":
        rows = sorted(
            (date.fromisoformat(e["start"]), date.fromisoformat(e["end"]), e["state"]) for e in entries
        )
        return cls(tuple(rows))

    @classmethod
    def load(cls, path) -> "MarketCalendar":
        with open(path, encoding="utf-8") as f:
            return cls.from_entries(json.load(f))

    def to_entries(self) -> list[dict]:
        return [{"start": s.isoformat(), "end": e.isoformat(), "state": st} for s, e, st in self.intervals]

    def state_on(self, d: date) -> str:
        for start, end, state in self.intervals:
            if start <= d <= end:
                return state
        raise ValueError(f"date {d} outside market calendar coverage")


DEFAULT_CALENDAR = MarketCalendar.from_entries([
    {"start": "2000-01-04", "end": "2001-06-13", "state": "bullish"},
    {"start": "2001-06-14", "end": "2005-06-03", "state": "bearish"},
    {"start": "2005-06-04", "end": "2007-10-16", "state": "bullish"},
    {"start": "2007-10-17", "end": "2008-10-27", "state": "bearish"},
    {"start": "2008-10-28", "end": "2009-08-04", "state": "bullish"},
    {"start": "2009-08-05", "end": "2011-12-30", "state": "bearish"},
])


def label_market_state(d: date, calendar: MarketCalendar = DEFAULT_CALENDAR) -> str:
    return calendar.state_on(d)


@dataclass(frozen=True)
class LimitHitEvent:
    """First limit hit of a stock-day.

    ``hit_index`` indexes ``session.ticks`` (quotes included);
    ``prehit_ticks`` runs from the open through the hit tick inclusive.
    """

    stock_id: str
    date: date
    direction: str
    hit_index: int
    prehit_ticks: tuple[TradeTick, ...]
    market_state: str
    opening_hit: bool
    exchange: str
    prev_close: int
    stock_class: str
    limits: LimitPrices

    @property
    def key(self) -> tuple[str, date]:
        return (self.stock_id, self.date)

    @property
    def hit_price(self) -> int:
        return self.prehit_ticks[-1].price

    def trades(self) -> list[TradeTick]:
        return [t for t in self.prehit_ticks if t.volume > 0]


def detect_first_hit(
    session: DailySession,
    limits: LimitPrices | None = None,
    calendar: MarketCalendar = DEFAULT_CALENDAR,
    rounding: str = "half_away_from_zero",
) -> LimitHitEvent | None:
    """Return the earliest trade at either limit, or ``None``.

    Only trade prints count; a quote sitting at the limit is not a hit.
    Every trade of the session is checked against the band, since a print
    outside it means the inputs are inconsistent.
    """
    if limits is None:
        limits = compute_limits(session.prev_close, session.limit_rate, rounding)
    up, down = limits.up_limit, limits.down_limit
    hit = None
    first_trade = None
    for i, t in enumerate(session.ticks):
        if t.volume <= 0:
            continue
        p = t.price
        if p > up or p < down:
            raise DataIntegrityError(
                f"{session.stock_id} {session.date}: trade at {p} outside [{down}, {up}] (tick {i})"
            )
        if first_trade is None:
            first_trade = i
        if hit is None and (p == up or p == down):
            hit = i
    if hit is None:
        return None
    direction = "up" if session.ticks[hit].price == up else "down"
    return LimitHitEvent(
        stock_id=session.stock_id,
        date=session.date,
        direction=direction,
        hit_index=hit,
        prehit_ticks=session.ticks[: hit + 1],
        market_state=calendar.state_on(session.date),
        opening_hit=hit == first_trade,
        exchange=session.exchange,
        prev_close=session.prev_close,
        stock_class=session.stock_class,
        limits=limits,
    )
