"""Energy savings of the ML detector versus RF power, both technology nodes.

    python scripts/energy_sweep.py --out results/energy
"""

import argparse
from pathlib import Path

from nbiot_npss.harness import energy
from nbiot_npss.harness.config import EnergyConfig, load_config

ROOT = Path(__file__).resolve().parent.parent

ap = argparse.ArgumentParser()
ap.add_argument("--out", type=Path, default=Path("results/energy"))
args = ap.parse_args()
args.out.mkdir(parents=True, exist_ok=True)

cfg = load_config(ROOT / "configs" / "energy.cfg", EnergyConfig)
rows = energy.sweep(cfg.p_ml_w, cfg.p_rf_min_w, cfg.p_rf_max_w, cfg.points, cfg.asymptote_p_rf_w,
                    cfg.p_ac_ratio, cfg.t_ml_s, cfg.t_ac_s)
energy.write_sweep(args.out / "energy_sweep.csv", rows)

print(f"limit for large RF power: {energy.savings_limit(cfg.t_ml_s, cfg.t_ac_s):.2f}%")
for p_ml in cfg.p_ml_w:
    for target in (0.0, 20.0, 30.0):
        p_rf = energy.p_rf_for_savings(target, p_ml, cfg.p_ac_ratio * p_ml, cfg.t_ml_s, cfg.t_ac_s)
        print(f"P_ML = {1000 * p_ml:5.1f} mW: {target:4.0f}% savings from P_RF = {1000 * p_rf:7.2f} mW")
