"""Per-trade regression rows for one limit-hit event."""

from __future__ import annotations

import io

from limitlens.features import EventSkipped, build_feature_matrix
from limitlens.limits import detect_first_hit
from limitlens.synth import SynthConfig, gen_sessions

data = gen_sessions(SynthConfig(seed=2, n_stocks=6, n_days=10))

for s in data.sessions:
    ev = detect_first_hit(s)
    if ev is None:
        continue
    try:
        fm = build_feature_matrix(ev, data.indexes[ev.exchange])
    except EventSkipped as exc:
        print(f"skip {ev.stock_id} {ev.date}: {exc.reason}")
        continue
    break

print(f"event {ev.stock_id} {ev.date} {ev.direction}: {len(fm.rows)} rows, dropped {dict(fm.dropped)}")
print("Y_k share:", round(float(fm.y.mean()), 3))

buf = io.StringIO()
fm.to_csv(buf)
print("\n".join(buf.getvalue().splitlines()[:4]))

# The conditional variant swaps in the excursion dummy times lagged yield, one matrix per m.
for m in (5.0, 7.0, 9.0):
    cond = fm.as_variant("conditional", m)
    active = sum(r.ir_prev for r in cond.rows)
    print(f"m={m:g}: excursion dummy active on {active}/{len(cond.rows)} rows")
