"""Decision layer: four-peak analysis, calibrated thresholds, the ML detector
and the auto-correlation baseline it is compared against."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import signal

from . import channel, frontend, npss
from .npss import FrequencyGrid, frequency_grid
from .olscorr import CorrelationGrid, OlsConfig, OlsStream, accumulate_subframe, new_stream

N_PEAKS = 4
EXCLUSION_CELLS = 2
DISTINCTNESS = 1.2
MAX_SUBFRAMES = 200
GATE_MARGIN = 2.0  # calibration keeps at least 2 x fa_target of noise runs through the gate


class StatisticsError(ValueError):
    """Too few Monte Carlo runs to resolve the requested quantile."""


class Peak(NamedTuple):
    lag: int
    candidate: int
    value: float


@dataclass(frozen=True)
class PeakReport:
    peaks: list[Peak]
    grid_mean: float

    def ratio(self, i: int = 0) -> float:
        if self.grid_mean <= 0:
            return 0.0
        return self.peaks[i].value / self.grid_mean

    def distinctness(self) -> float:
        top, last = self.peaks[0].value, self.peaks[-1].value
        if last > 0:
            return top / last
        return np.inf if top > 0 else 1.0


@dataclass(frozen=True)
class Detection:
    theta_hat: int
    f_hat_hz: float
    metric: float
    subframes_used: int
    candidate: int = 0


@dataclass(frozen=True)
class ThresholdTable:
    """Per-depth peak/mean thresholds and distinctness factors.

    ``distinctness`` may be given as a scalar; it is stored as one value per
    depth because calibration lowers it where noise rarely reaches D.
    """

    thresholds: np.ndarray  # thresholds[n-1] applies after n combined subframes
    fa_target: float = 0.01
    distinctness: np.ndarray | float = DISTINCTNESS

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        d = np.broadcast_to(np.asarray(self.distinctness, dtype=float), t.shape).copy()
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "distinctness", d)

    @property
    def max_subframes(self) -> int:
        return len(self.thresholds)

    def _check(self, n: int) -> None:
        if not 1 <= n <= len(self.thresholds):
            raise IndexError(f"subframe count {n} outside table range 1..{len(self.thresholds)}")

    def __getitem__(self, n: int) -> float:
        self._check(n)
        return float(self.thresholds[n - 1])

    def gate(self, n: int) -> float:
        """Distinctness factor required after n combined subframes."""
        self._check(n)
        return float(self.distinctness[n - 1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subframes", "threshold", "fa_target", "distinctness"])
            for n, (t, d) in enumerate(zip(self.thresholds, self.distinctness), start=1):
                w.writerow([n, repr(float(t)), repr(self.fa_target), repr(float(d))])

    @classmethod
    def from_csv(cls, path) -> "ThresholdTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty threshold table")
        rows.sort(key=lambda r: int(r["subframes"]))
        if [int(r["subframes"]) for r in rows] != list(range(1, len(rows) + 1)):
            raise ValueError(f"{path}: subframe counts must run 1..n without gaps")
        return cls(
            thresholds=np.array([float(r["threshold"]) for r in rows]),
            fa_target=float(rows[0]["fa_target"]),
            distinctness=np.array([float(r["distinctness"]) for r in rows]),
        )


def find_peaks(grid: CorrelationGrid, n_peaks: int = N_PEAKS, exclusion: int = EXCLUSION_CELLS) -> PeakReport:
    """Largest cell, then successive maxima outside +-exclusion lags of earlier picks.

    Excluded lags are removed for every frequency candidate, because the
    frequency side-lobes of one event share its lag.  The lag axis wraps.
    """
    if grid.subframes_combined < 1:
        raise ValueError("grid holds no accumulated subframe")
    acc = grid.acc
    if acc.size == 0:
        raise ValueError("empty grid")
    n_lags = acc.shape[0]
    best_cand = acc.argmax(axis=1)
    row_max = acc[np.arange(n_lags), best_cand].astype(float)
    live = np.ones(n_lags, dtype=bool)
    peaks = []
    for _ in range(n_peaks):
        if not live.any():
            break
        lag = int(np.argmax(np.where(live, row_max, -np.inf)))
        peaks.append(Peak(lag, int(best_cand[lag]), float(row_max[lag])))
        live[np.arange(lag - exclusion, lag + exclusion + 1) % n_lags] = False
    return PeakReport(peaks=peaks, grid_mean=float(acc.mean()))


def decide(report: PeakReport, table: ThresholdTable, subframes: int, freq_grid: FrequencyGrid | None = None) -> Detection | None:
    """Detect iff peak/mean clears the table entry and peak/4th-peak >= D_n."""
    threshold = table[subframes]
    ratio = report.ratio(0)
    if report.grid_mean <= 0 or ratio < threshold:
        return None
    if report.distinctness() < table.gate(subframes):
        return None
    top = report.peaks[0]
    f_hat = float(freq_grid.candidates_hz[top.candidate]) if freq_grid is not None else 0.0
    return Detection(theta_hat=top.lag, f_hat_hz=f_hat, metric=ratio, subframes_used=subframes, candidate=top.candidate)


def fires(stats: np.ndarray, table: ThresholdTable) -> np.ndarray:
    """Decisions for (runs, depths, 2) statistics [peak/mean, distinctness]."""
    stats = np.asarray(stats, dtype=float)
    depths = stats.shape[1]
    if depths > table.max_subframes:
        raise ValueError(f"table covers {table.max_subframes} depths, statistics have {depths}")
    return (stats[..., 0] >= table.thresholds[:depths]) & (stats[..., 1] >= table.distinctness[:depths])


def thresholds_from_statistics(
    stats: np.ndarray,
    fa_target: float,
    distinctness: float = DISTINCTNESS,
    gate_margin: float = GATE_MARGIN,
) -> ThresholdTable:
    """Joint per-depth calibration from (runs, depths, 2) noise statistics.

    stats[..., 0] is peak/mean and stats[..., 1] is peak0/peak3.  At each
    depth the gate is D_n = min(D, level passed by gate_margin * fa_target
    of the runs), then the threshold is the k-th largest peak/mean among
    runs that pass the gate, k = round(fa_target * runs).  Where noise
    rarely reaches D this lowers the gate instead of letting the rate fall
    below target.
    """
    stats = np.asarray(stats, dtype=float)
    if stats.ndim != 3 or stats.shape[2] != 2:
        raise ValueError(f"expected (runs, depths, 2) statistics, got shape {stats.shape}")
    runs, depths = stats.shape[:2]
    if not 0 < fa_target <= 1:
        raise ValueError("fa_target must lie in (0, 1]")
    if fa_target >= 1:
        return ThresholdTable(np.ones(depths), fa_target, np.ones(depths))
    if runs * fa_target < 10:
        raise StatisticsError(f"{runs} runs give fewer than 10 expected exceedances at fa_target={fa_target}")
    k = max(1, int(round(fa_target * runs)))
    k_gate = min(runs, max(k, int(round(gate_margin * fa_target * runs))))
    ratio, dist = stats[..., 0], stats[..., 1]
    gate = np.minimum(distinctness, np.sort(dist, axis=0)[::-1][k_gate - 1])
    gated = np.where(dist >= gate, ratio, 0.0)
    thr = np.sort(gated, axis=0)[::-1][k - 1]
    return ThresholdTable(np.maximum(thr, 1.0), fa_target, gate)


@dataclass
class MlDetector:
    """OLS correlation, non-coherent combining and the four-peak decision."""

    table: ThresholdTable | None = None
    freq_grid: FrequencyGrid = field(default_factory=frequency_grid)
    cfg: OlsConfig = OlsConfig()
    exclusion: int = EXCLUSION_CELLS

    def __post_init__(self):
        self.stream: OlsStream = new_stream(self.freq_grid, self.cfg)
        self.grid = CorrelationGrid.empty(self.cfg.n_cells, self.freq_grid.n_candidates)
        self.last_report: PeakReport | None = None

    def update(self, samples_240k) -> PeakReport | None:
        """Feed one subframe; returns the peak report when a window completes."""
        windows = self.stream.push(samples_240k)
        if not windows:
            return None
        if len(windows) > 1:
            raise ValueError("push at most one subframe per call")
        self.grid = accumulate_subframe(self.grid, windows[0], self.cfg)
        self.last_report = find_peaks(self.grid, exclusion=self.exclusion)
        return self.last_report

    def step(self, samples_240k) -> Detection | None:
        report = self.update(samples_240k)
        if report is None or self.table is None:
            return None
        n = self.grid.subframes_combined
        if n > self.table.max_subframes:
            return None
        return decide(report, self.table, n, self.freq_grid)


def ml_detector_step(samples_240k, state: MlDetector) -> Detection | None:
    return state.step(samples_240k)


AC_LAG = npss.SYMBOL_FFT + npss.CP_NORMAL  # 137 samples at 1.92 MHz
AC_CELL = 16  # one 240 kHz grid cell (2 samples) in 1.92 MHz samples
AC_EXCLUSION_CELLS = 9  # the AC peak is a triangle of half-width 137 samples
AC_DISTINCTNESS = 1.0


def ac_symbol_offsets() -> np.ndarray:
    """Start of each NPSS symbol (CP included) relative to the NPSS start."""
    lengths = np.array(npss.cp_lengths()) + npss.SYMBOL_FFT
    return np.concatenate(([0], np.cumsum(lengths)[:-1]))


def ac_weights() -> np.ndarray:
    c = npss.CODE_COVER
    return c[:-1] * c[1:]


def ac_metric(x, n_lags: int) -> np.ndarray:
    """Weighted lag-137 autocorrelation A(t) for t = 0..n_lags-1.

    A(t) = sum_l c[l]c[l+1] sum_{k=0}^{136} x[t+o_l+k] conj(x[t+o_l+k+137])
    over the 10 symbol transitions, o_l the symbol start offsets.  Needs
    len(x) >= n_lags + 1507.
    """
    x = np.asarray(x, dtype=np.complex128)
    offs = ac_symbol_offsets()[:-1]
    span = int(offs[-1]) + 2 * AC_LAG
    if len(x) < n_lags + span - 1:
        raise ValueError(f"need {n_lags + span - 1} samples, got {len(x)}")
    prod = x[:-AC_LAG] * np.conj(x[AC_LAG:])
    csum = np.concatenate(([0], np.cumsum(prod)))
    win = csum[AC_LAG:] - csum[:-AC_LAG]  # win[t] = sum_{k<137} prod[t+k]
    out = np.zeros(n_lags, dtype=np.complex128)
    for w, o in zip(ac_weights(), offs):
        out += w * win[o : o + n_lags]
    return out


@dataclass
class AcDetector:
    """Auto-correlation baseline at 1.92 MHz.

    The input is low-pass filtered with the receiver's anti-alias filter
    (causal, delay compensated), |A(t)|^2 is accumulated per subframe over
    all 19,200 timing hypotheses and max-pooled to the same 1,200-cell grid
    as the ML detector.  Decision: peak-to-mean against its own table.
    Timing only; the frequency estimate is reported as 0 Hz.
    """

    table: ThresholdTable | None = None
    exclusion: int = AC_EXCLUSION_CELLS

    def __post_init__(self):
        self._h = frontend.decimation_filter()
        self._delay = frontend.group_delay()
        self._span = int(ac_symbol_offsets()[-2]) + 2 * AC_LAG - 1
        self._filt_tail = np.zeros(len(self._h) - 1, dtype=np.complex128)
        self._pending = np.zeros(0, dtype=np.complex128)  # filtered, aligned samples
        self._skip = self._delay  # filtered samples to drop for alignment
        self._next_window = 0
        n_cells = channel.FRAME_LEN // AC_CELL
        self.grid = CorrelationGrid.empty(n_cells, 1)
        self.last_report: PeakReport | None = None

    def update(self, samples_1920k) -> PeakReport | None:
        x = np.asarray(samples_1920k, dtype=np.complex128)
        y = signal.fftconvolve(np.concatenate((self._filt_tail, x)), self._h, mode="valid")
        self._filt_tail = np.concatenate((self._filt_tail, x))[-(len(self._h) - 1) :]
        if self._skip:
            drop = min(self._skip, len(y))
            y = y[drop:]
            self._skip -= drop
        self._pending = np.concatenate((self._pending, y))
        n = channel.FRAME_LEN
        if len(self._pending) < n + self._span:
            return None
        a = ac_metric(self._pending[: n + self._span], n)
        self._pending = self._pending[n:]
        self._next_window += 1
        power = (a.real**2 + a.imag**2).reshape(-1, AC_CELL).max(axis=1)
        self.grid = CorrelationGrid(self.grid.acc + power[:, None], self.grid.subframes_combined + 1)
        self.last_report = find_peaks(self.grid, exclusion=self.exclusion)
        return self.last_report

    def step(self, samples_1920k) -> Detection | None:
        report = self.update(samples_1920k)
        if report is None or self.table is None:
            return None
        n = self.grid.subframes_combined
        if n > self.table.max_subframes:
            return None
        return decide(report, self.table, n)


def ac_baseline_step(samples_1920k, state: AcDetector) -> Detection | None:
    return state.step(samples_1920k)


def make_detector(kind: str, table: ThresholdTable | None = None):
    if kind == "ml":
        return MlDetector(table=table)
    if kind == "ac":
        return AcDetector(table=table)
    raise ValueError(f"unknown detector {kind!r}; expected 'ml' or 'ac'")


def default_distinctness(kind: str) -> float:
    return DISTINCTNESS if kind == "ml" else AC_DISTINCTNESS


def noise_statistics(
    kinds: tuple[str, ...],
    runs: int,
    max_subframes: int,
    seed: int,
    snr_db: float = -12.6,
    channel_kind: str = "awgn_only",
    filler: str = "random_qpsk_ofdm",
    run_offset: int = 0,
) -> dict[str, np.ndarray]:
    """Decision statistics of NPSS-free streams, shape (runs, max_subframes, 2) per detector.

    [..., 0] is peak/mean and [..., 1] is peak0/peak3 after each depth.

    Run r uses channel seed (seed, run_offset + r); all detectors see the
    same stream.
    """
    layout = channel.FrameLayout(filler=filler)
    out = {k: np.zeros((runs, max_subframes, 2)) for k in kinds}
    for r in range(runs):
        cfg = channel.ChannelConfig(
            snr_db=snr_db,
            channel_kind=channel_kind,
            seed=run_seed(seed, run_offset + r),
            npss_present=False,
        )
        stream = channel.ChannelStream(cfg, layout)
        dets = {k: make_detector(k) for k in kinds}
        depth = {k: 0 for k in kinds}
        while min(depth.values()) < max_subframes:
            hi, lo = stream.next_subframe()
            for k, det in dets.items():
                if depth[k] >= max_subframes:
                    continue
                rep = det.update(lo if k == "ml" else hi)
                if rep is not None:
                    out[k][r, depth[k]] = (rep.ratio(0), rep.distinctness())
                    depth[k] += 1
    return out


def run_seed(seed: int, run: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(run,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def calibrate_threshold(
    noise_runs: int,
    max_subframes: int = MAX_SUBFRAMES,
    fa_target: float = 0.01,
    seed: int = 0,
    detector: str = "ml",
    **noise_kw,
) -> ThresholdTable:
    """Per-depth thresholds and gates for a noise-only detection rate of fa_target."""
    if noise_runs < 1:
        raise StatisticsError("noise_runs must be positive")
    if fa_target < 1 and noise_runs * fa_target < 10:
        raise StatisticsError(f"{noise_runs} runs give fewer than 10 expected exceedances at fa_target={fa_target}")
    stats = noise_statistics((detector,), noise_runs, max_subframes, seed, **noise_kw)[detector]
    return thresholds_from_statistics(stats, fa_target, default_distinctness(detector))
