"""Price limits from a previous close, and first-hit detection on a synthetic day."""

from __future__ import annotations

from limitlens.limits import compute_limits, detect_first_hit, label_market_state
from limitlens.marketdata import format_ticks
from limitlens.synth import SynthConfig, gen_sessions

# Prices are integer ticks (0.01 currency units); limits are exact rationals rounded once.
for prev_close, rate in [(1007, 10), (1005, 5), (399, 10)]:
    lim = compute_limits(prev_close, rate)
    print(f"close {format_ticks(prev_close):>6}  {rate:>2}%  ->  "
          f"down {format_ticks(lim.down_limit)}  up {format_ticks(lim.up_limit)}")

data = gen_sessions(SynthConfig(seed=1, n_stocks=4, n_days=10))
injected = {(h.stock_id, h.date): h for h in data.hits}
print(f"\n{len(data.sessions)} sessions, {len(injected)} injected hits")

found = 0
for s in data.sessions:
    ev = detect_first_hit(s)
    if ev is None:
        continue
    found += 1
    truth = injected.get(ev.key)
    print(f"{ev.stock_id} {ev.date} {ev.direction:4s} at {format_ticks(ev.hit_price)} "
          f"tick {ev.hit_index:4d} state={label_market_state(ev.date)} opening={ev.opening_hit} "
          f"matches_injected={truth is not None and truth.direction == ev.direction}")
print(f"detected {found} of {len(injected)}")
