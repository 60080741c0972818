"""Monte Carlo runners: threshold calibration and detection latency."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import channel
from ..detector import (
    AcDetector,
    MlDetector,
    ThresholdTable,
    run_seed,
    default_distinctness,
    fires,
    noise_statistics,
    thresholds_from_statistics,
)
from .config import CalibrateConfig, LatencyConfig

SUBFRAME_MS = 10
N_CELLS = 1200


def _chunks(total: int, workers: int) -> list[tuple[int, int]]:
    """(offset, count) pieces; results do not depend on the split."""
    n = max(1, min(workers, total))
    edges = np.linspace(0, total, n + 1).astype(int)
    return [(int(a), int(b - a)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _noise_chunk(args):
    kinds, offset, count, depths, seed, kw = args
    return noise_statistics(kinds, count, depths, seed, run_offset=offset, **kw)


def calibration_statistics(cfg: CalibrateConfig) -> dict[str, np.ndarray]:
    kinds = tuple(cfg.detectors)
    kw = dict(snr_db=cfg.snr_db, channel_kind=cfg.channel_kind, filler=cfg.filler)
    jobs = [(kinds, off, n, cfg.max_subframes, cfg.seed, kw) for off, n in _chunks(cfg.runs, cfg.workers)]
    if len(jobs) == 1:
        parts = [_noise_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(len(jobs)) as pool:
            parts = list(pool.map(_noise_chunk, jobs))
    return {k: np.concatenate([p[k] for p in parts], axis=0) for k in kinds}


def calibrate(cfg: CalibrateConfig) -> dict[str, ThresholdTable]:
    stats = calibration_statistics(cfg)
    return {k: thresholds_from_statistics(v, cfg.fa_target, default_distinctness(k)) for k, v in stats.items()}


def false_alarm_rates(
    tables: dict[str, ThresholdTable],
    runs: int,
    depths: int,
    seed: int,
    **noise_kw,
) -> dict[str, np.ndarray]:
    """Fraction of fresh noise-only sequences whose decision fires at each depth 1..depths."""
    stats = noise_statistics(tuple(tables), runs, depths, seed, **noise_kw)
    out = {}
    for k, s in stats.items():
        out[k] = fires(s, tables[k]).mean(axis=0)
    return out


@dataclass(frozen=True)
class TrialRow:
    run_id: int
    detector: str
    snr_db: float
    detected: bool
    latency_ms: int
    theta_err_cells: float
    f_err_hz: float
    censored: bool
    false_lock: bool

    FIELDS = ("run_id", "detector", "snr_db", "detected", "latency_ms", "theta_err_cells", "f_err_hz", "censored", "false_lock")

    def as_list(self) -> list:
        return [
            self.run_id,
            self.detector,
            repr(float(self.snr_db)),
            int(self.detected),
            self.latency_ms,
            _fmt(self.theta_err_cells),
            _fmt(self.f_err_hz),
            int(self.censored),
            int(self.false_lock),
        ]


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


@dataclass(frozen=True)
class LatencySummary:
    detector: str
    trials: int
    hits: int
    hit_rate: float
    mean_ms: float
    p50_ms: float
    p90_ms: float
    false_locks: int


@dataclass
class LatencyResult:
    rows: list[TrialRow]
    max_subframes: int

    def for_detector(self, kind: str) -> list[TrialRow]:
        return [r for r in self.rows if r.detector == kind]

    def detectors(self) -> list[str]:
        return sorted({r.detector for r in self.rows})

    def cdf(self, kind: str) -> list[tuple[int, float]]:
        rows = self.for_detector(kind)
        lat = np.array([r.latency_ms for r in rows if r.detected])
        n = len(rows)
        grid = SUBFRAME_MS * np.arange(1, self.max_subframes + 1)
        return [(int(L), float(np.sum(lat <= L)) / n) for L in grid]

    def quantile_ms(self, kind: str, q: float) -> float:
        """Smallest latency whose hit fraction reaches q; inf if never reached."""
        for L, frac in self.cdf(kind):
            if frac >= q - 1e-12:
                return float(L)
        return math.inf

    def summary(self, kind: str) -> LatencySummary:
        rows = self.for_detector(kind)
        hits = [r for r in rows if r.detected]
        return LatencySummary(
            detector=kind,
            trials=len(rows),
            hits=len(hits),
            hit_rate=len(hits) / len(rows) if rows else 0.0,
            mean_ms=float(np.mean([r.latency_ms for r in hits])) if hits else math.inf,
            p50_ms=self.quantile_ms(kind, 0.5),
            p90_ms=self.quantile_ms(kind, 0.9),
            false_locks=sum(r.false_lock for r in rows),
        )

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "latency_runs.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TrialRow.FIELDS)
            for r in sorted(self.rows, key=lambda r: (r.run_id, r.detector)):
                w.writerow(r.as_list())
        with open(out / "latency_cdf.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["detector", "latency_ms", "fraction_detected"])
            for kind in self.detectors():
                for L, frac in self.cdf(kind):
                    w.writerow([kind, L, repr(frac)])
        with open(out / "latency_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["detector", "trials", "hits", "hit_rate", "mean_ms", "p50_ms", "p90_ms", "false_locks"])
            for kind in self.detectors():
                s = self.summary(kind)
                w.writerow([s.detector, s.trials, s.hits, repr(s.hit_rate), repr(s.mean_ms), repr(s.p50_ms), repr(s.p90_ms), s.false_locks])


def _circ_cells(a: float, b: float, n: int = N_CELLS) -> float:
    d = (a - b) % n
    return min(d, n - d)


def run_trial(run_id: int, cfg: LatencyConfig, tables: dict[str, ThresholdTable]) -> list[TrialRow]:
    """One acquisition attempt; all configured detectors watch the same stream."""
    seed = run_seed(cfg.seed, run_id)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(99,)))
    cfo = float(rng.uniform(-cfg.cfo_range_hz, cfg.cfo_range_hz))
    tau = int(rng.integers(0, channel.FRAME_LEN))
    ch_cfg = channel.ChannelConfig(
        snr_db=cfg.snr_db,
        cfo_hz=cfo,
        timing_offset_samples=tau,
        channel_kind=cfg.channel_kind,
        doppler_hz=cfg.doppler_hz,
        seed=seed,
    )
    stream = channel.ChannelStream(ch_cfg, channel.FrameLayout(filler=cfg.filler))
    truth_cell = (int(round(stream.true_start_240k)) % 2400) // 2
    dets = {}
    for kind in cfg.detectors:
        dets[kind] = MlDetector(table=tables[kind]) if kind == "ml" else AcDetector(table=tables[kind])
    tolerance = {"ml": cfg.timing_tolerance_ml, "ac": cfg.timing_tolerance_ac}
    rows = {}
    while len(rows) < len(dets):
        hi, lo = stream.next_subframe()
        for kind, det in dets.items():
            if kind in rows:
                continue
            hit = det.step(lo if kind == "ml" else hi)
            used = det.grid.subframes_combined
            if hit is not None:
                err = _circ_cells(hit.theta_hat, truth_cell)
                ok = err <= tolerance[kind]
                f_err = hit.f_hat_hz - cfo if kind == "ml" else math.nan
                rows[kind] = TrialRow(
                    run_id, kind, cfg.snr_db, ok,
                    SUBFRAME_MS * (used if ok else cfg.max_subframes),
                    err, f_err, not ok, not ok,
                )
            elif used >= cfg.max_subframes:
                rows[kind] = TrialRow(
                    run_id, kind, cfg.snr_db, False,
                    SUBFRAME_MS * cfg.max_subframes, math.nan, math.nan, True, False,
                )
    return [rows[k] for k in cfg.detectors]


def packaged_table_path(kind: str) -> Path:
    """Threshold table shipped with the package (2,000 runs, 200 depths, 1% per depth)."""
    if kind not in ("ml", "ac"):
        raise ValueError(f"unknown detector {kind!r}")
    return Path(__file__).resolve().parent.parent / "data" / f"thresholds_{kind}.csv"


def load_tables(cfg: LatencyConfig) -> dict[str, ThresholdTable]:
    tables = {}
    for kind in cfg.detectors:
        path = (cfg.thresholds_ml if kind == "ml" else cfg.thresholds_ac) or packaged_table_path(kind)
        if not Path(path).is_file():
            raise FileNotFoundError(f"threshold table {path} not found")
        table = ThresholdTable.from_csv(path)
        if table.max_subframes < cfg.max_subframes:
            raise ValueError(f"{path} covers {table.max_subframes} subframes, run cap is {cfg.max_subframes}")
        tables[kind] = table
    return tables


def run_latency(cfg: LatencyConfig, tables: dict[str, ThresholdTable] | None = None, progress=None) -> LatencyResult:
    tables = tables if tables is not None else load_tables(cfg)
    rows = []
    if cfg.workers <= 1:
        for run_id in range(cfg.trials):
            rows.extend(run_trial(run_id, cfg, tables))
            if progress is not None:
                progress(run_id)
    else:
        jobs = [(range(off, off + n), cfg, tables) for off, n in _chunks(cfg.trials, cfg.workers)]
        with ProcessPoolExecutor(len(jobs)) as pool:
            for part in pool.map(_trial_chunk, jobs):
                rows.extend(part)
    return LatencyResult(rows=rows, max_subframes=cfg.max_subframes)


def _trial_chunk(args):
    ids, cfg, tables = args
    return [row for i in ids for row in run_trial(i, cfg, tables)]


def grid_peak(cfo_hz: float, timing_offset_samples: int = 3000, subframes: int = 2) -> float:
    """Largest accumulated |C|^2 per subframe for a clean stream at ``cfo_hz``."""
    ch = channel.ChannelConfig(cfo_hz=cfo_hz, timing_offset_samples=timing_offset_samples)
    stream = channel.ChannelStream(ch)
    det = MlDetector()
    for _ in range(subframes + 1):
        det.update(stream.next_subframe()[1])
    return det.last_report.peaks[0].value / det.grid.subframes_combined


def mid_grid_coverage(offset_hz: float = 468.75, base_hz: float = 0.0, timing_offset_samples: int = 3000) -> float:
    """Peak amplitude with the CFO ``offset_hz`` off a candidate, relative to on-candidate."""
    on = grid_peak(base_hz, timing_offset_samples)
    off = grid_peak(base_hz + offset_hz, timing_offset_samples)
    return math.sqrt(off / on)


def high_snr_sanity(trials: int = 100, snr_db: float = 30.0, seed: int = 5, tables=None) -> list[TrialRow]:
    """AWGN trials at high SNR, stopped after two subframes (20 ms)."""
    tables = tables if tables is not None else {"ml": ThresholdTable.from_csv(packaged_table_path("ml"))}
    cfg = LatencyConfig(
        trials=trials, snr_db=snr_db, channel_kind="awgn_only", max_subframes=2, seed=seed, detectors=("ml",)
    )
    return [r for i in range(trials) for r in run_trial(i, cfg, tables)]
