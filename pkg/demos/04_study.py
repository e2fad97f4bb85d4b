"""End-to-end study: synthetic tree on disk, CLI run, and a look at the reports."""

from __future__ import annotations

import csv
import json
import os
import tempfile

from limitlens.cli import main

work = tempfile.mkdtemp(prefix="limitlens_demo_")
data_dir, out_dir = os.path.join(work, "data"), os.path.join(work, "out")

main(["synth", "--seed", "4", "--stocks", "8", "--days", "15", "--output-dir", data_dir])
main(["detect", "--data-dir", data_dir, "--output-dir", out_dir])
main(["run", "--data-dir", data_dir, "--output-dir", out_dir, "--workers", "1"])

print("\nreports:", ", ".join(sorted(os.listdir(out_dir))))

with open(os.path.join(out_dir, "run_manifest.json")) as f:
    manifest = json.load(f)
print("counts:", json.dumps(manifest["counts"], sort_keys=True))

with open(os.path.join(out_dir, "aggregate_base.csv")) as f:
    rows = [r for r in csv.DictReader(f) if r["coefficient"] == "yield_k-1"]
print("\nyield coefficient signs by partition (base model):")
for r in rows:
    print(f"  {r['market_state']:8s} {r['direction']:5s} {r['link']:7s} "
          f"+{r['n_pos']} -{r['n_neg']} 0:{r['n_zero']} fail:{r['n_fail']}")

main(["report", "--output-dir", out_dir])
