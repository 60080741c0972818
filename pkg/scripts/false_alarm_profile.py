"""Per-depth false-alarm rate of the packaged tables on fresh noise seeds.

    python scripts/false_alarm_profile.py --runs 2000 --depths 200 --out results/fa
"""

import argparse
import csv
from pathlib import Path

from nbiot_npss.detector import ThresholdTable
from nbiot_npss.harness.experiments import false_alarm_rates, packaged_table_path

ap = argparse.ArgumentParser()
ap.add_argument("--runs", type=int, default=2000)
ap.add_argument("--depths", type=int, default=200)
ap.add_argument("--seed", type=int, default=777)
ap.add_argument("--out", type=Path, default=Path("results/fa"))
args = ap.parse_args()
args.out.mkdir(parents=True, exist_ok=True)

tables = {k: ThresholdTable.from_csv(packaged_table_path(k)) for k in ("ml", "ac")}
rates = false_alarm_rates(tables, args.runs, args.depths, args.seed)
with open(args.out / "false_alarm.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["detector", "subframes", "false_alarm_rate"])
    for k, r in rates.items():
        for d, v in enumerate(r, start=1):
            w.writerow([k, d, repr(float(v))])
for k, r in rates.items():
    print(f"{k}: mean {100 * r.mean():.2f}%, min {100 * r.min():.2f}%, max {100 * r.max():.2f}%")
