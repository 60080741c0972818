"""Energy per timing acquisition: ML detector versus auto-correlation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Estimated detector power by technology node (W).
P_ML_130NM = 0.038
P_ML_28NM = 0.0025


@dataclass(frozen=True)
class EnergyParams:
    p_rf_w: float
    p_ml_w: float = P_ML_28NM
    p_ac_w: float | None = None  # defaults to p_ml_w / 10
    t_ml_s: float = 0.400
    t_ac_s: float = 0.620

    def __post_init__(self):
        if self.p_ac_w is None:
            object.__setattr__(self, "p_ac_w", self.p_ml_w / 10.0)
        for name in ("p_rf_w", "p_ml_w", "p_ac_w", "t_ml_s", "t_ac_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")


def energy_savings(p: EnergyParams) -> float:
    """Percent energy saved by the ML detector; negative when it costs more."""
    e_ml = (p.p_rf_w + p.p_ml_w) * p.t_ml_s
    e_ac = (p.p_rf_w + p.p_ac_w) * p.t_ac_s
    return 100.0 * (1.0 - e_ml / e_ac)


def savings_limit(t_ml_s: float = 0.400, t_ac_s: float = 0.620) -> float:
    """Supremum of the savings as the RF power grows without bound."""
    return 100.0 * (1.0 - t_ml_s / t_ac_s)


def p_rf_for_savings(target_percent: float, p_ml_w: float, p_ac_w: float | None = None,
                     t_ml_s: float = 0.400, t_ac_s: float = 0.620) -> float:
    """RF power at which the savings equal ``target_percent`` (closed form)."""
    p_ac_w = p_ml_w / 10.0 if p_ac_w is None else p_ac_w
    a = 1.0 - target_percent / 100.0
    denom = a * t_ac_s - t_ml_s
    if denom <= 0:
        raise ValueError(f"{target_percent}% is not below the limit {savings_limit(t_ml_s, t_ac_s):.2f}%")
    return (p_ml_w * t_ml_s - a * p_ac_w * t_ac_s) / denom


def sweep(p_ml_values, p_rf_min_w=1e-3, p_rf_max_w=1.0, points=61, asymptote_p_rf_w=1e6,
          p_ac_ratio=0.1, t_ml_s=0.400, t_ac_s=0.620) -> list[tuple[float, float, float]]:
    """(p_ml_w, p_rf_w, delta_e_percent) rows over a log-spaced RF power sweep."""
    if points < 1 or p_rf_min_w <= 0 or p_rf_max_w < p_rf_min_w:
        raise ValueError("empty or invalid RF power sweep")
    p_rf = np.logspace(np.log10(p_rf_min_w), np.log10(p_rf_max_w), points)
    if asymptote_p_rf_w:
        p_rf = np.append(p_rf, asymptote_p_rf_w)
    rows = []
    for p_ml in p_ml_values:
        for prf in p_rf:
            e = energy_savings(EnergyParams(float(prf), p_ml, p_ac_ratio * p_ml, t_ml_s, t_ac_s))
            rows.append((float(p_ml), float(prf), e))
    if not rows:
        raise ValueError("empty sweep: no detector power given")
    return rows


def write_sweep(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p_ml_w", "p_rf_w", "delta_e_percent"])
        for p_ml, prf, e in rows:
            w.writerow([repr(p_ml), repr(prf), repr(e)])
