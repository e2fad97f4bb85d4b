"""Builders for small hand-scripted sessions and a naive feature oracle."""

from __future__ import annotations

import math
from fractions import Fraction
from datetime import date, datetime, time, timedelta

from limitlens.marketdata import DailySession, IndexSeries, TradeTick

DAY = date(2008, 11, 3)  # inside a bullish interval


def at(h, m, s=0, d=DAY):
    return datetime.combine(d, time(h, m, s))


def ladder(bid, ask, vol=1000, levels=5):
    bids = tuple((bid - i, vol) for i in range(levels))
    asks = tuple((ask + i, vol) for i in range(levels))
    return bids, asks


def quote(ts, bid, ask, vol=1000):
    return TradeTick(ts, None, 0, *ladder(bid, ask, vol))


def trade(ts, price, volume, bid, ask, vol=1000):
    return TradeTick(ts, price, volume, *ladder(bid, ask, vol))


def session(ticks, prev_close=1000, stock_id="600000", exchange="SHSE", stock_class="common", d=DAY):
    return DailySession(stock_id, exchange, d, prev_close, stock_class, tuple(ticks))


def flat_index(d=DAY, level=3000.0, exchange="SHSE"):
    bars = []
    for start, end in ((time(9, 30), time(11, 30)), (time(13, 0), time(15, 0))):
        t, stop = datetime.combine(d, start), datetime.combine(d, end)
        while t <= stop:
            bars.append((t, level))
            t += timedelta(minutes=1)
    return IndexSeries(exchange, tuple(bars))


# -- naive oracle ------------------------------------------------------------
# Written from the formulas directly, without reusing library helpers.

def _grid_minutes(d):
    out = []
    t = datetime.combine(d, time(9, 30))
    while t <= datetime.combine(d, time(15, 0)):
        if not (time(11, 30) < t.time() < time(13, 0)):
            out.append(t)
        t += timedelta(minutes=1)
    return out


def naive_rows(event, index, m=None, J=None, sample_start=time(9, 33)):
    """Feature rows as plain dicts, one per usable trade."""
    s = 1 if event.direction == "up" else -1
    if J is None:
        J = 3 if event.date < date(2003, 12, 5) else 5
    ticks = list(event.prehit_ticks)
    trades = []
    for i, t in enumerate(ticks):
        if t.volume > 0 and t.timestamp > datetime.combine(event.date, sample_start):
            before = ticks[i - 1] if i > 0 else None
            trades.append((t, before))
    minutes = _grid_minutes(event.date)
    rows = []
    for j in range(3, len(trades)):
        window = trades[j - 3: j + 1]
        if any(b is None or not b.bid_levels or not b.ask_levels for _, b in window):
            continue
        cur, q = window[3]
        prev, qp = window[2]
        a, b = q.ask_levels[0][0], q.bid_levels[0][0]
        if cur.price > prev.price:
            up_move = 1
        elif cur.price < prev.price:
            up_move = -1
        else:
            up_move = 0
        if up_move == s:
            y = 1
        elif up_move == 0 and (cur.price - (a + b) / 2) * s > 0:
            y = 1
        else:
            y = 0
        done = [mm for mm in minutes if mm < cur.timestamp]
        if len(done) < 4:
            continue
        lv = [index.level_at(mm) for mm in done[-4:]]
        if any(v is None for v in lv):
            continue
        mkt = [math.log(lv[3] / lv[2]), math.log(lv[2] / lv[1]), math.log(lv[1] / lv[0])]
        dirvol = []
        for lag in (2, 1, 0):
            t, qq = window[lag]
            mid2 = qq.ask_levels[0][0] + qq.bid_levels[0][0]
            sign = 1 if s * (2 * t.price - mid2) > 0 else -1
            dirvol.append(math.log(t.volume) * sign)
        pa, pb = qp.ask_levels[0][0], qp.bid_levels[0][0]
        # value imbalance in tick-shares (exact integers), then currency units inside the log
        imb = s * (sum(p * v for p, v in qp.bid_levels[:J]) - sum(p * v for p, v in qp.ask_levels[:J]))
        sign = (imb > 0) - (imb < 0)
        dep = 0.0 if imb == 0 else sign * math.log(Fraction(abs(imb), 100))
        yl = math.log(prev.price / window[1][0].price)
        outside = prev.price < pb or prev.price > pa
        if m is None:
            ir = 0
        else:
            move = s * (prev.price - event.prev_close) / event.prev_close * 100
            ir = 1 if move >= m - 1e-12 else 0
        rows.append({
            "y": y,
            "dT_k": (cur.timestamp - prev.timestamp).total_seconds(),
            "V_k-1*IBS_k-1": dirvol[0],
            "V_k-2*IBS_k-2": dirvol[1],
            "V_k-3*IBS_k-3": dirvol[2],
            "yield_k-1": yl,
            "MKT_k-1": mkt[0],
            "MKT_k-2": mkt[1],
            "MKT_k-3": mkt[2],
            "spread_k-1": (pa - pb) / ((pa + pb) / 2),
            "depth_k-1": dep,
            "IS_k-1*yield_k-1": yl if outside else 0.0,
            "IR_k-1*yield_k-1": yl * ir,
        })
    return rows
