"""Latency CDFs of the ML detector and the auto-correlation baseline.

    python scripts/latency_cdf.py --out results/latency [--trials 200] [--snr -12.6]

Writes latency_runs.csv, latency_cdf.csv and latency_summary.csv and prints
the CDF at a few latencies.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from nbiot_npss.harness.config import LatencyConfig, load_config
from nbiot_npss.harness.experiments import run_latency

ROOT = Path(__file__).resolve().parent.parent

ap = argparse.ArgumentParser()
ap.add_argument("--out", type=Path, default=Path("results/latency"))
ap.add_argument("--trials", type=int)
ap.add_argument("--snr", type=float)
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()

cfg = load_config(ROOT / "configs" / "latency.cfg", LatencyConfig, {"trials": args.trials, "snr_db": args.snr})
cfg = replace(cfg, workers=args.workers)
res = run_latency(cfg)
res.write(args.out)

marks = (50, 100, 140, 200, 400, 620, 1000, 2000)
print("latency_ms  " + "  ".join(f"{m:>6d}" for m in marks))
for kind in res.detectors():
    cdf = dict(res.cdf(kind))
    print(f"{kind:>10}  " + "  ".join(f"{cdf.get(m, float('nan')):6.3f}" for m in marks))
for kind in res.detectors():
    print(res.summary(kind))
