"""Regenerate the packaged threshold tables (about an hour on one core).

    python scripts/calibrate_thresholds.py [--workers 4]
"""

import argparse
import shutil
import tempfile
from pathlib import Path

from nbiot_npss.harness.cli import main

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "src" / "nbiot_npss" / "data"

ap = argparse.ArgumentParser()
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()

with tempfile.TemporaryDirectory() as tmp:
    cfg = Path(tmp) / "calibrate.cfg"
    cfg.write_text((ROOT / "configs" / "calibrate.cfg").read_text() + f"workers = {args.workers}\n")
    rc = main(["-v", "calibrate", "--config", str(cfg), "--out", tmp])
    if rc:
        raise SystemExit(rc)
    for kind in ("ml", "ac"):
        shutil.copy(Path(tmp) / f"thresholds_{kind}.csv", DATA / f"thresholds_{kind}.csv")
        print("wrote", DATA / f"thresholds_{kind}.csv")
