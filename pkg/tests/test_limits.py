import json
from datetime import date
from decimal import ROUND_HALF_EVEN, ROUND_HALF_UP, Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from limitlens.limits import (
    DEFAULT_CALENDAR,
    DataIntegrityError,
    LimitPrices,
    MarketCalendar,
    compute_limits,
    detect_first_hit,
    label_market_state,
    round_ticks,
)

from helpers import at, quote, session, trade


def decimal_limits(prev_close, rate, mode=ROUND_HALF_UP):
    pc = Decimal(prev_close)
    r = Decimal(str(rate)) / 100
    up = (pc * (1 + r)).quantize(Decimal(1), rounding=mode)
    down = (pc * (1 - r)).quantize(Decimal(1), rounding=mode)
    return LimitPrices(int(up), int(down))


def test_compute_limits_examples():
    assert compute_limits(1007, 10) == LimitPrices(1108, 906)
    # 10.05 * 1.1 = 11.055 and 10.05 * 0.9 = 9.045: both half ticks, rounded away from zero
    assert compute_limits(1005, 10) == LimitPrices(1106, 905)
    assert compute_limits(1005, 10, "half_even") == LimitPrices(1106, 904)
    assert compute_limits(1010, 5) == LimitPrices(1061, 960)


@given(st.integers(1, 10**6), st.sampled_from([10, 5, 10.0, 5.0]))
def test_compute_limits_matches_decimal(prev_close, rate):
    assert compute_limits(prev_close, rate) == decimal_limits(prev_close, rate)
    assert compute_limits(prev_close, rate, "half_even") == decimal_limits(prev_close, rate, ROUND_HALF_EVEN)


@given(st.integers(1, 10**6), st.sampled_from([10, 5]))
def test_limits_bracket_prev_close(prev_close, rate):
    lim = compute_limits(prev_close, rate)
    assert lim.down_limit <= prev_close <= lim.up_limit
    exact = Fraction(prev_close * rate, 100)
    assert abs(lim.up_limit - prev_close - exact) <= Fraction(1, 2)
    assert abs(prev_close - lim.down_limit - exact) <= Fraction(1, 2)


def test_round_ticks_modes():
    assert round_ticks(Fraction(5, 2)) == 3
    assert round_ticks(Fraction(-5, 2)) == -3
    assert round_ticks(Fraction(5, 2), "half_even") == 2
    with pytest.raises(ValueError):
        round_ticks(Fraction(1), "up")


@pytest.mark.parametrize(
    "d, state",
    [
        (date(2000, 1, 4), "bullish"),
        (date(2001, 6, 13), "bullish"),
        (date(2001, 6, 14), "bearish"),
        (date(2005, 6, 3), "bearish"),
        (date(2005, 6, 4), "bullish"),
        (date(2007, 10, 16), "bullish"),
        (date(2007, 10, 17), "bearish"),
        (date(2008, 10, 27), "bearish"),
        (date(2008, 10, 28), "bullish"),
        (date(2009, 8, 4), "bullish"),
        (date(2009, 8, 5), "bearish"),
        (date(2011, 12, 30), "bearish"),
    ],
)
def test_default_calendar_boundaries(d, state):
    assert label_market_state(d) == state


def test_calendar_outside_coverage():
    with pytest.raises(ValueError):
        DEFAULT_CALENDAR.state_on(date(1999, 12, 31))
    with pytest.raises(ValueError):
        DEFAULT_CALENDAR.state_on(date(2012, 1, 1))


def test_calendar_validation_and_load(tmp_path):
    with pytest.raises(ValueError):
        MarketCalendar.from_entries([
            {"start": "2008-01-01", "end": "2008-01-10", "state": "bullish"},
            {"start": "2008-01-12", "end": "2008-01-20", "state": "bearish"},
        ])
    with pytest.raises(ValueError):
        MarketCalendar.from_entries([{"start": "2008-01-01", "end": "2008-01-10", "state": "sideways"}])
    p = tmp_path / "cal.json"
    p.write_text(json.dumps([{"start": "2008-01-01", "end": "2012-12-31", "state": "bearish"}]))
    cal = MarketCalendar.load(p)
    assert cal.state_on(date(2008, 11, 3)) == "bearish"
    assert MarketCalendar.from_entries(DEFAULT_CALENDAR.to_entries()) == DEFAULT_CALENDAR


def test_detect_skips_quote_at_limit():
    s = session([
        quote(at(9, 30), 999, 1001),
        trade(at(9, 30, 5), 1001, 100, 1000, 1002),
        quote(at(9, 31), 1099, 1100),  # ask sitting on the up limit is not a hit
        trade(at(9, 32), 1050, 100, 1049, 1051),
        trade(at(9, 33), 1100, 300, 1099, 1100),
        trade(at(9, 34), 1100, 300, 1099, 1100),
    ])
    ev = detect_first_hit(s)
    assert ev.direction == "up" and ev.hit_index == 4 and not ev.opening_hit
    assert ev.prehit_ticks == s.ticks[:5]
    assert ev.hit_price == 1100
    assert ev.market_state == "bullish"
    assert len(ev.trades()) == 3


def test_detect_down_and_opening_hit():
    s = session([quote(at(9, 25), 900, 901), trade(at(9, 30), 900, 50, 900, 901), trade(at(9, 31), 901, 50, 900, 902)])
    ev = detect_first_hit(s)
    assert ev.direction == "down" and ev.opening_hit and ev.hit_index == 1


def test_detect_none_and_integrity():
    assert detect_first_hit(session([trade(at(9, 31), 1000, 10, 999, 1001)])) is None
    with pytest.raises(DataIntegrityError):
        detect_first_hit(session([trade(at(9, 31), 1000, 10, 999, 1001), trade(at(9, 32), 1101, 10, 1100, 1102)]))


def test_detect_uses_st_limit():
    s = session([trade(at(9, 31), 1000, 10, 999, 1001), trade(at(9, 40), 1050, 10, 1049, 1051)],
                stock_class="special_treatment")
    ev = detect_first_hit(s)
    assert ev.direction == "up" and ev.limits == LimitPrices(1050, 950)
