"""Tick, session and index data model plus the CSV readers/writers.

All prices are held as integer tick counts (1 tick = 0.01 currency units).
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, time
from typing import IO, Iterable, Mapping, Sequence

EXCHANGES = ("SHSE", "SZSE")
STOCK_CLASSES = ("common", "special_treatment")
N_LEVELS = 5
TICKS_PER_UNIT = 100

TICK_COLUMNS = (
    ["stock_id", "exchange", "date", "time", "price", "volume"]
    + [c for j in range(1, N_LEVELS + 1) for c in (f"bid{j}", f"bidvol{j}")]
    + [c for j in range(1, N_LEVELS + 1) for c in (f"ask{j}", f"askvol{j}")]
)
METADATA_COLUMNS = ["stock_id", "exchange", "date", "prev_close", "stock_class"]
INDEX_COLUMNS = ["exchange", "date", "time", "level"]

Level = tuple[int, int]


class MarketDataError(ValueError):
    """Raised for malformed input; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def price_to_ticks(price: str | float | int) -> int:
    """Convert a monetary amount to an exact integer tick count.

    Decimal strings are parsed exactly. Floats are accepted only when they
    round-trip through two decimals; anything carrying more precision is
    rejected rather than rounded.

    >>> price_to_ticks("10.07")
    1007
    """
    if isinstance(price, bool):
        raise TypeError("price must be numeric")
    if isinstance(price, int):
        ticks = price * TICKS_PER_UNIT
    elif isinstance(price, float):
        # repr is the shortest string that round-trips, so it exposes any extra precision
        ticks = _parse_decimal_ticks(repr(price))
    else:
        ticks = _parse_decimal_ticks(str(price))
    if ticks < 0:
        raise MarketDataError(f"negative price {price!r}")
    return ticks


def _parse_decimal_ticks(text: str) -> int:
    s = text.strip()
    if not s:
        raise MarketDataError("empty price")
    neg = s.startswith("-")
    if neg or s.startswith("+"):
        s = s[1:]
    whole, _, frac = s.partition(".")
    if not (whole or frac) or (whole and not whole.isdigit()) or (frac and not frac.isdigit()):
        raise MarketDataError(f"not a decimal price: {text!r}")
    if len(frac) > 2:
        if frac[2:].strip("0"):
            raise MarketDataError(f"price {text!r} has more than 2 decimals")
        frac = frac[:2]
    ticks = int(whole or "0") * TICKS_PER_UNIT + int(frac.ljust(2, "0"))
    return -ticks if neg else ticks


def ticks_to_price(ticks: int) -> float:
    """Inverse of :func:`price_to_ticks` (exact for every 2-decimal price)."""
    return ticks / TICKS_PER_UNIT


def format_ticks(ticks: int) -> str:
    """Canonical 2-decimal string for a tick count."""
    sign = "-" if ticks < 0 else ""
    q, r = divmod(abs(ticks), TICKS_PER_UNIT)
    return f"{sign}{q}.{r:02d}"


@dataclass(frozen=True)
class TradeTick:
    """One book snapshot, optionally carrying a trade print.

    ``volume == 0`` marks a quote-only update; ``price`` is then ``None``.
    Book levels are ``(price_ticks, volume)`` pairs, best first.
    """

    timestamp: datetime
    price: int | None
    volume: int
    bid_levels: tuple[Level, ...] = ()
    ask_levels: tuple[Level, ...] = ()

    @property
    def is_trade(self) -> bool:
        return self.volume > 0

    @property
    def best_bid(self) -> int | None:
        return self.bid_levels[0][0] if self.bid_levels else None

    @property
    def best_ask(self) -> int | None:
        return self.ask_levels[0][0] if self.ask_levels else None

    def book_problem(self) -> str | None:
        """Name of the violated book invariant, or ``None`` if the book is valid."""
        bids, asks = self.bid_levels, self.ask_levels
        if bids and asks and bids[0][0] >= asks[0][0]:
            return "crossed_book"
        if any(bids[i][0] <= bids[i + 1][0] for i in range(len(bids) - 1)):
            return "unordered_levels"
        if any(asks[i][0] >= asks[i + 1][0] for i in range(len(asks) - 1)):
            return "unordered_levels"
        if any(p <= 0 or v < 0 for p, v in bids + asks):
            return "bad_level"
        return None


@dataclass(frozen=True)
class DailySession:
    stock_id: str
    exchange: str
    date: date
    prev_close: int
    stock_class: str
    ticks: tuple[TradeTick, ...]
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.prev_close <= 0:
            raise MarketDataError(f"{self.stock_id} {self.date}: prev_close must be positive")
        if self.stock_class not in STOCK_CLASSES:
            raise MarketDataError(f"unknown stock class {self.stock_class!r}")
        if self.exchange not in EXCHANGES:
            raise MarketDataError(f"unknown exchange {self.exchange!r}")

    @property
    def key(self) -> tuple[str, date]:
        return (self.stock_id, self.date)

    @property
    def limit_rate(self) -> int:
        """Daily limit in percent implied by the stock class."""
        return 10 if self.stock_class == "common" else 5

    def trades(self) -> list[TradeTick]:
        return [t for t in self.ticks if t.volume > 0]


@dataclass(frozen=True)
class IndexSeries:
    """Minute index levels for one exchange, keyed by minute timestamp."""

    exchange: str
    bars: tuple[tuple[datetime, float], ...]
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        prev = None
        for ts, level in self.bars:
            if not level > 0:
                raise MarketDataError(f"non-positive index level {level} at {ts}")
            if prev is not None and ts <= prev:
                raise MarketDataError(f"index timestamps not strictly increasing at {ts}")
            prev = ts
        object.__setattr__(self, "_lookup", dict(self.bars))

    def __len__(self) -> int:
        return len(self.bars)

    def level_at(self, minute: datetime) -> float | None:
        return self._lookup.get(minute)


@dataclass
class ValidationReport:
    """Row accounting for one parse; every input row lands in exactly one bucket."""

    rows_total: int = 0
    rows_accepted: int = 0
    rejected: Counter = field(default_factory=Counter)
    flagged_sessions: list = field(default_factory=list)

    @property
    def rows_rejected(self) -> int:
        return sum(self.rejected.values())


@dataclass
class TickParseResult:
    sessions: list[DailySession]
    report: ValidationReport


@dataclass(frozen=True)
class SessionMeta:
    prev_close: int
    stock_class: str
    exchange: str


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    return open(source, newline="", encoding="utf-8")


def _check_header(reader, expected: Sequence[str]) -> None:
    header = next(reader, None)
    if header is None:
        raise MarketDataError("missing header", line=1)
    header = [h.strip() for h in header]
    if header != list(expected):
        raise MarketDataError(f"unexpected header {header}", line=1)


def _parse_levels(row: list[str], start: int, line: int) -> tuple[Level, ...]:
    levels = []
    seen_gap = False
    for j in range(N_LEVELS):
        p, v = row[start + 2 * j].strip(), row[start + 2 * j + 1].strip()
        if not p and not v:
            seen_gap = True
            continue
        if not p or not v:
            raise MarketDataError("book level missing price or volume", line=line)
        if seen_gap:
            raise MarketDataError("book level present after an absent level", line=line)
        try:
            vol = int(v)
        except ValueError:
            raise MarketDataError(f"bad level volume {v!r}", line=line) from None
        try:
            levels.append((_parse_decimal_ticks(p), vol))
        except MarketDataError as exc:
            raise MarketDataError(str(exc), line=line) from None
    return tuple(levels)


def _parse_date(text: str, line: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise MarketDataError(f"bad date {text!r}", line=line) from None


def _parse_time(text: str, line: int) -> time:
    s = text.strip()
    try:
        if len(s) != 8:
            raise ValueError
        return time.fromisoformat(s)
    except ValueError:
        raise MarketDataError(f"bad time {text!r}", line=line) from None


def parse_metadata_file(source) -> dict[tuple[str, date], SessionMeta]:
    """Read the session metadata CSV into a ``(stock_id, date) -> SessionMeta`` map."""
    f = _open_text(source)
    reader = csv.reader(f)
    _check_header(reader, METADATA_COLUMNS)
    out: dict[tuple[str, date], SessionMeta] = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(METADATA_COLUMNS):
            raise MarketDataError(f"expected {len(METADATA_COLUMNS)} fields, got {len(row)}", line=line)
        stock_id, exchange, d, prev_close, stock_class = (c.strip() for c in row)
        if exchange not in EXCHANGES:
            raise MarketDataError(f"unknown exchange {exchange!r}", line=line)
        if stock_class not in STOCK_CLASSES:
            raise MarketDataError(f"unknown stock class {stock_class!r}", line=line)
        try:
            pc = _parse_decimal_ticks(prev_close)
        except MarketDataError as exc:
            raise MarketDataError(str(exc), line=line) from None
        if pc <= 0:
            raise MarketDataError("prev_close must be positive", line=line)
        key = (stock_id, _parse_date(d, line))
        if key in out:
            raise MarketDataError(f"duplicate metadata for {key}", line=line)
        out[key] = SessionMeta(pc, stock_class, exchange)
    return out


def parse_tick_file(
    source,
    metadata: Mapping[tuple[str, date], SessionMeta],
    schema: str = "v1",
) -> TickParseResult:
    """Parse a tick CSV into per-(stock, date) sessions.

    Malformed rows raise :class:`MarketDataError` naming the line. Rows whose
    book violates an invariant are rejected and tallied in the report, as are
    rows with no matching metadata entry. Sessions whose timestamps arrive out
    of order are stably sorted and flagged ``"non_monotone"``.
    """
    if schema != "v1":
        raise MarketDataError(f"unsupported tick schema {schema!r}")
    f = _open_text(source)
    reader = csv.reader(f)
    _check_header(reader, TICK_COLUMNS)
    report = ValidationReport()
    groups: dict[tuple[str, date], list[TradeTick]] = {}
    exchanges: dict[tuple[str, date], str] = {}
    n_fields = len(TICK_COLUMNS)
    bid_start, ask_start = 6, 6 + 2 * N_LEVELS

    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        report.rows_total += 1
        if len(row) != n_fields:
            raise MarketDataError(f"expected {n_fields} fields, got {len(row)}", line=line)
        stock_id, exchange = row[0].strip(), row[1].strip()
        if exchange not in EXCHANGES:
            raise MarketDataError(f"unknown exchange {exchange!r}", line=line)
        d = _parse_date(row[2], line)
        ts = datetime.combine(d, _parse_time(row[3], line))
        try:
            volume = int(row[5])
        except ValueError:
            raise MarketDataError(f"bad volume {row[5]!r}", line=line) from None
        if volume < 0:
            raise MarketDataError("negative volume", line=line)
        price_text = row[4].strip()
        if price_text:
            try:
                price = _parse_decimal_ticks(price_text)
            except MarketDataError as exc:
                raise MarketDataError(str(exc), line=line) from None
            if price <= 0:
                raise MarketDataError("non-positive trade price", line=line)
        elif volume > 0:
            raise MarketDataError("trade row without price", line=line)
        else:
            price = None
        tick = TradeTick(
            ts,
            price if volume > 0 else None,
            volume,
            _parse_levels(row, bid_start, line),
            _parse_levels(row, ask_start, line),
        )
        problem = tick.book_problem()
        if problem:
            report.rejected[problem] += 1
            continue
        key = (stock_id, d)
        if key not in metadata:
            report.rejected["missing_metadata"] += 1
            continue
        if exchanges.setdefault(key, exchange) != exchange:
            raise MarketDataError(f"exchange changes within session {key}", line=line)
        groups.setdefault(key, []).append(tick)
        report.rows_accepted += 1

    sessions = []
    for key in sorted(groups):
        ticks = groups[key]
        flags = frozenset()
        if any(ticks[i].timestamp > ticks[i + 1].timestamp for i in range(len(ticks) - 1)):
            ticks = sorted(ticks, key=lambda t: t.timestamp)
            flags = frozenset({"non_monotone"})
            report.flagged_sessions.append(key)
        meta = metadata[key]
        sessions.append(
            DailySession(key[0], exchanges[key], key[1], meta.prev_close, meta.stock_class, tuple(ticks), flags)
        )
    return TickParseResult(sessions, report)


def parse_index_file(source) -> IndexSeries:
    """Parse a single-exchange minute index CSV.

    Rows must be strictly increasing in time; the first offending timestamp is
    named in the error.
    """
    f = _open_text(source)
    reader = csv.reader(f)
    _check_header(reader, INDEX_COLUMNS)
    bars = []
    exchange = None
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(INDEX_COLUMNS):
            raise MarketDataError(f"expected {len(INDEX_COLUMNS)} fields, got {len(row)}", line=line)
        ex = row[0].strip()
        if ex not in EXCHANGES:
            raise MarketDataError(f"unknown exchange {ex!r}", line=line)
        if exchange is None:
            exchange = ex
        elif ex != exchange:
            raise MarketDataError("index file mixes exchanges", line=line)
        ts = datetime.combine(_parse_date(row[1], line), _parse_time(row[2], line))
        if ts.second:
            raise MarketDataError(f"index timestamp {ts} not on a minute boundary", line=line)
        try:
            level = float(row[3])
        except ValueError:
            raise MarketDataError(f"bad index level {row[3]!r}", line=line) from None
        if not level > 0:
            raise MarketDataError(f"non-positive index level {level}", line=line)
        if bars and ts == bars[-1][0]:
            raise MarketDataError(f"duplicate minute {ts.isoformat(sep=' ')}", line=line)
        if bars and ts < bars[-1][0]:
            raise MarketDataError(f"unsorted index at {ts.isoformat(sep=' ')}", line=line)
        bars.append((ts, level))
    if exchange is None:
        raise MarketDataError("index file has no rows")
    return IndexSeries(exchange, tuple(bars))


def _level_fields(levels: tuple[Level, ...]) -> list[str]:
    out = []
    for j in range(N_LEVELS):
        if j < len(levels):
            out += [format_ticks(levels[j][0]), str(levels[j][1])]
        else:
            out += ["", ""]
    return out


def write_tick_file(sessions: Iterable[DailySession], dest: IO[str]) -> None:
    """Serialize sessions in canonical form (sorted by key, ticks in session order)."""
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(TICK_COLUMNS)
    for s in sorted(sessions, key=lambda s: s.key):
        d = s.date.isoformat()
        for t in s.ticks:
            w.writerow(
                [s.stock_id, s.exchange, d, t.timestamp.strftime("%H:%M:%S"),
                 format_ticks(t.price) if t.price is not None else "", str(t.volume)]
                + _level_fields(t.bid_levels)
                + _level_fields(t.ask_levels)
            )


def write_metadata_file(sessions: Iterable[DailySession], dest: IO[str]) -> None:
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(METADATA_COLUMNS)
    for s in sorted(sessions, key=lambda s: s.key):
        w.writerow([s.stock_id, s.exchange, s.date.isoformat(), format_ticks(s.prev_close), s.stock_class])


def write_index_file(series: IndexSeries, dest: IO[str]) -> None:
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(INDEX_COLUMNS)
    for ts, level in series.bars:
        w.writerow([series.exchange, ts.date().isoformat(), ts.strftime("%H:%M:%S"), repr(float(level))])


def metadata_from_sessions(sessions: Iterable[DailySession]) -> dict[tuple[str, date], SessionMeta]:
    return {s.key: SessionMeta(s.prev_close, s.stock_class, s.exchange) for s in sessions}
