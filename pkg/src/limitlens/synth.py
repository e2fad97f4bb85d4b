"""Seeded synthetic tick sessions and regression datasets with known ground truth.

Every (stock, day) pair draws from its own ``SeedSequence`` child keyed by
``(stock, day)``, so enlarging a universe never perturbs the sessions that
were already there. Index series use keys in a disjoint range.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, time, timedelta
from typing import IO

import numpy as np

from .features import BASE_COLUMNS
from .limits import compute_limits
from .marketdata import DailySession, IndexSeries, TradeTick

_INDEX_KEY = 1_000_000
_GLM_KEY = 2_000_000
_SESSION_OPEN = time(9, 30, 0)
_LUNCH_START = time(11, 30, 0)
_LUNCH_END = time(13, 0, 0)
_CLOSE = time(14, 59, 59)

# Realistic per-column scales for the base regressor schema (dt, dirvol x3, yield, mkt x3, spread, depth).
DEFAULT_TRUE_BETA = (0.2, -0.01, 0.05, -0.03, 0.04, -250.0, 150.0, 40.0, 20.0, 60.0, 0.02)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_stocks: int = 5
    n_days: int = 20
    start_date: date = date(2008, 10, 6)
    st_fraction: float = 0.0
    p_up_hit: float = 0.3
    p_down_hit: float = 0.3
    p_opening_hit: float = 0.05
    prehit_trades: tuple[int, int] = (80, 300)
    post_hit_ticks: int = 10
    mean_interval: float = 4.0
    quote_prob: float = 0.3
    size_mu: float = 8.5
    size_sigma: float = 1.2
    level_volume_mu: float = 8.0
    level_volume_sigma: float = 1.0
    suboptimal_prob: float = 0.2
    # hit days open this fraction of the way toward the limit
    open_gap: tuple[float, float] = (0.3, 0.85)
    shift_prob: float = 0.8
    # trade-direction logit: intercept, lagged yield, lagged directional volume, pull toward the path
    drive_intercept: float = 0.0
    drive_yield: float = -300.0
    drive_flow: float = 0.04
    drive_pull: float = 0.5
    index_level: float = 3000.0
    index_sigma: float = 4e-4
    # regression-dataset generator
    n_obs: int = 2000
    true_beta: tuple[float, ...] = DEFAULT_TRUE_BETA

    def __post_init__(self):
        for name in ("st_fraction", "p_up_hit", "p_down_hit", "p_opening_hit", "quote_prob", "suboptimal_prob",
                     "shift_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.p_up_hit + self.p_down_hit > 1.0:
            raise ValueError("p_up_hit + p_down_hit exceeds 1")
        lo, hi = self.prehit_trades
        if not 1 <= lo <= hi:
            raise ValueError("prehit_trades must satisfy 1 <= lo <= hi")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        d["prehit_trades"] = list(self.prehit_trades)
        d["open_gap"] = list(self.open_gap)
        d["true_beta"] = list(self.true_beta)
        return d


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def trading_days(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def stock_identity(i: int) -> tuple[str, str]:
    """Deterministic ``(stock_id, exchange)`` for the i-th synthetic stock."""
    if i % 2 == 0:
        return f"{600000 + i // 2:06d}", "SHSE"
    return f"{1 + i // 2:06d}", "SZSE"


@dataclass(frozen=True)
class InjectedHit:
    stock_id: str
    date: date
    direction: str
    hit_index: int
    opening_hit: bool


@dataclass
class SynthData:
    sessions: list[DailySession]
    indexes: dict[str, IndexSeries]
    hits: list[InjectedHit] = field(default_factory=list)

    def manifest(self) -> dict:
        return {
            "hits": [
                {"stock_id": h.stock_id, "date": h.date.isoformat(), "direction": h.direction,
                 "hit_index": h.hit_index, "opening_hit": h.opening_hit}
                for h in self.hits
            ],
            "n_sessions": len(self.sessions),
        }

    def write_manifest(self, dest: IO[str], config: SynthConfig | None = None) -> None:
        doc = self.manifest()
        if config is not None:
            doc["config"] = config.to_dict()
        json.dump(doc, dest, indent=2, sort_keys=True)
        dest.write("\n")


class _Clock:
    """Advances through continuous-trading time, skipping the lunch break."""

    def __init__(self, d: date, rng: np.random.Generator, mean_interval: float):
        self.t = datetime.combine(d, _SESSION_OPEN)
        self.rng = rng
        self.mean = mean_interval
        self.lunch_start = datetime.combine(d, _LUNCH_START)
        self.lunch_end = datetime.combine(d, _LUNCH_END)
        self.close = datetime.combine(d, _CLOSE)

    def next(self) -> datetime:
        step = 1 + int(self.rng.exponential(self.mean - 1)) if self.mean > 1 else 1
        t = self.t + timedelta(seconds=step)
        if self.lunch_start < t < self.lunch_end:
            t = self.lunch_end + (t - self.lunch_start)
        if t > self.close:
            raise ValueError("synthetic session ran past the close; lower prehit_trades or mean_interval")
        self.t = t
        return t


def _ladder(best: int, step_sign: int, lo: int, hi: int, rng, cfg: SynthConfig) -> tuple[tuple[int, int], ...]:
    levels = []
    p = best
    for _ in range(5):
        if not lo <= p <= hi:
            break
        vol = max(1, int(round(rng.lognormal(cfg.level_volume_mu, cfg.level_volume_sigma))))
        levels.append((p, vol))
        p += step_sign * (1 + int(rng.integers(0, 2)))
    return tuple(levels)


def _book(bid: int, ask: int, down: int, up: int, rng, cfg):
    return _ladder(bid, -1, down, up, rng, cfg), _ladder(ask, +1, down, up, rng, cfg)


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x)) if x > -700 else 0.0


def _gen_session(cfg: SynthConfig, stock: int, day_idx: int, d: date):
    rng = _rng(cfg.seed, stock, day_idx)
    stock_id, exchange = stock_identity(stock)
    st = rng.random() < cfg.st_fraction
    stock_class = "special_treatment" if st else "common"
    prev_close = int(rng.integers(300, 3001))
    lim = compute_limits(prev_close, 5 if st else 10)
    up, down = lim.up_limit, lim.down_limit

    u = rng.random()
    direction = "up" if u < cfg.p_up_hit else "down" if u < cfg.p_up_hit + cfg.p_down_hit else None
    opening = direction is not None and rng.random() < cfg.p_opening_hit
    lo, hi = cfg.prehit_trades
    n_trades = 0 if opening else int(rng.integers(lo, hi + 1))

    clock = _Clock(d, rng, cfg.mean_interval)
    ticks: list[TradeTick] = []
    # inner band keeps every pre-hit print strictly inside the limits
    in_lo, in_hi = down + 1, up - 1
    s = 1 if direction != "down" else -1
    gap_open = 0.0
    if direction is not None:
        lo_gap, hi_gap = cfg.open_gap
        gap_open = s * rng.uniform(lo_gap, hi_gap) * (up - prev_close)
    bid = min(max(prev_close + int(round(gap_open)) + int(rng.integers(-3, 4)), in_lo), in_hi - 1)
    ask = bid + 1 + int(rng.integers(0, 2))
    ask = min(ask, in_hi)
    bids, asks = _book(bid, ask, down, up, rng, cfg)
    ticks.append(TradeTick(clock.next(), None, 0, bids, asks))

    target = up if direction == "up" else down if direction == "down" else prev_close
    start_mid = (bid + ask) / 2
    last_yield = 0.0
    last_flow = 0.0
    last_price = None
    done = 0
    while done < n_trades:
        if rng.random() < cfg.quote_prob:
            ticks.append(TradeTick(clock.next(), None, 0, bids, asks))
            continue
        done += 1
        frac = done / (n_trades + 1)
        path = start_mid + (target - start_mid) * frac if direction else prev_close
        mid = (bid + ask) / 2
        gap = s * (path - mid) / max(4.0, abs(target - start_mid) / 15.0)
        pi = _sigmoid(cfg.drive_intercept + cfg.drive_yield * s * last_yield + cfg.drive_flow * last_flow
                      + cfg.drive_pull * gap)
        toward = rng.random() < pi
        trade_dir = s if toward else -s  # +1 buyer-initiated, -1 seller-initiated
        if trade_dir > 0:
            price = ask + (1 if rng.random() < cfg.suboptimal_prob else 0)
        else:
            price = bid - (1 if rng.random() < cfg.suboptimal_prob else 0)
        price = min(max(price, in_lo), in_hi)
        volume = max(1, int(round(rng.lognormal(cfg.size_mu, cfg.size_sigma))))
        ibs_sign = 1 if 2 * price > bid + ask else -1

        # book reaction; the trade tick carries the post-trade snapshot
        if rng.random() < cfg.shift_prob:
            bid = min(max(bid + trade_dir, in_lo), in_hi - 1)
        spr = 1 + int(rng.integers(0, 3) == 0)
        ask = min(bid + spr, in_hi)
        if ask <= bid:
            bid = ask - 1
        bids, asks = _book(bid, ask, down, up, rng, cfg)
        ticks.append(TradeTick(clock.next(), price, volume, bids, asks))

        if last_price is not None:
            last_yield = math.log(price) - math.log(last_price)
        last_flow = s * ibs_sign * math.log(volume)
        last_price = price

    hit = None
    if direction is not None:
        # the hit print: at the limit, against the prevailing book
        volume = max(1, int(round(rng.lognormal(cfg.size_mu, cfg.size_sigma))))
        if direction == "up":
            bid, ask = up - 1, up
        else:
            bid, ask = down, down + 1
        bids, asks = _book(bid, ask, down, up, rng, cfg)
        hit_index = len(ticks)
        ticks.append(TradeTick(clock.next(), target, volume, bids, asks))
        hit = InjectedHit(stock_id, d, direction, hit_index, opening)
        for _ in range(cfg.post_hit_ticks):
            bids, asks = _book(bid, ask, down, up, rng, cfg)
            if rng.random() < 0.5:
                vol = max(1, int(round(rng.lognormal(cfg.size_mu, cfg.size_sigma))))
                ticks.append(TradeTick(clock.next(), target, vol, bids, asks))
            else:
                ticks.append(TradeTick(clock.next(), None, 0, bids, asks))

    session = DailySession(stock_id, exchange, d, prev_close, stock_class, tuple(ticks))
    return session, hit


def _gen_index(cfg: SynthConfig, exchange_idx: int, exchange: str, days: list[date]) -> IndexSeries:
    bars = []
    for di, d in enumerate(days):
        rng = _rng(cfg.seed, _INDEX_KEY + exchange_idx, di)
        level = cfg.index_level * math.exp(rng.normal(0.0, 0.01))
        for start, end in ((time(9, 30), time(11, 30)), (time(13, 0), time(15, 0))):
            t = datetime.combine(d, start)
            stop = datetime.combine(d, end)
            while t <= stop:
                bars.append((t, round(level, 4)))
                level *= math.exp(rng.normal(0.0, cfg.index_sigma))
                t += timedelta(minutes=1)
    return IndexSeries(exchange, tuple(bars))


def gen_sessions(config: SynthConfig) -> SynthData:
    """Generate sessions, both exchanges' minute index series and the hit manifest."""
    days = trading_days(config.start_date, config.n_days)
    sessions, hits = [], []
    for stock in range(config.n_stocks):
        for di, d in enumerate(days):
            session, hit = _gen_session(config, stock, di, d)
            sessions.append(session)
            if hit is not None:
                hits.append(hit)
    indexes = {ex: _gen_index(config, i, ex, days) for i, ex in enumerate(("SHSE", "SZSE"))}
    sessions.sort(key=lambda s: s.key)
    hits.sort(key=lambda h: (h.stock_id, h.date))
    return SynthData(sessions, indexes, hits)


def gen_glm_dataset(config: SynthConfig, replicate: int = 0, link: str = "logit"):
    """Design matrix with the base regressor schema and Bernoulli responses.

    Returns ``(X, y, true_beta)``; ``X`` excludes the intercept.
    """
    beta = np.asarray(config.true_beta, dtype=float)
    if beta.size != len(BASE_COLUMNS) + 1:
        raise ValueError(f"true_beta needs {len(BASE_COLUMNS) + 1} entries")
    rng = _rng(config.seed, _GLM_KEY, replicate)
    n = config.n_obs
    dt = rng.exponential(5.0, n)
    dirvol = np.where(rng.random((n, 3)) < 0.55, 1.0, -1.0) * rng.normal(config.size_mu, config.size_sigma, (n, 3))
    yld = rng.normal(5e-4, 1.5e-3, n)
    mkt = rng.normal(0.0, config.index_sigma, (n, 3))
    spr = 5e-4 * rng.gamma(4.0, 1.0, n)
    dep = rng.normal(4.0, 6.0, n)
    X = np.column_stack([dt, dirvol, yld, mkt, spr, dep])
    eta = beta[0] + X @ beta[1:]
    if link == "logit":
        prob = 1.0 / (1.0 + np.exp(-eta))
    else:
        from scipy.special import ndtr

        prob = ndtr(eta)
    y = (rng.random(n) < prob).astype(float)
    return X, y, beta
