"""Overlap-save cross-correlation against a bank of frequency hypotheses.

Lag convention: the correlation at absolute lag ``theta`` is

    C(theta, f) = sum_{k=0}^{188} r[theta + k] conj(s[k]) exp(-j 2 pi f k / fs)

so the frequency phasor is indexed relative to the lag.  With that
convention the overlap-save output equals the direct sum exactly, phase
included.

Block b holds input samples [b*step - N_O, b*step - N_O + N) (negative
indices read as zero) and yields the ``step`` valid lags starting at
b*step - N_O; the last N_O circular outputs wrap and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .npss import REF_LEN, FrequencyGrid, ReferenceBank, frequency_grid, reference_bank, waveforms
from .frontend import FS_LOW


@dataclass(frozen=True)
class OlsConfig:
    fft_size: int = 1024
    overlap: int = REF_LEN - 1
    samples_per_subframe: int = 2400
    grid_downsample: int = 2
    decay: float | None = None  # None: plain accumulation, else acc <- decay*acc + new

    def __post_init__(self):
        if not spectral.is_power_of_two(self.fft_size):
            raise spectral.SizingError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.step <= 0:
            raise ValueError("overlap must be smaller than fft_size")
        if self.samples_per_subframe % self.grid_downsample:
            raise ValueError("samples_per_subframe must be divisible by grid_downsample")
        if self.decay is not None and not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    @property
    def step(self) -> int:
        return self.fft_size - self.overlap

    @property
    def n_cells(self) -> int:
        return self.samples_per_subframe // self.grid_downsample


@dataclass(frozen=True)
class CorrelationGrid:
    acc: np.ndarray  # (n_cells, n_candidates), accumulated |C|^2
    subframes_combined: int = 0

    @classmethod
    def empty(cls, n_cells: int = 1200, n_candidates: int = 31) -> "CorrelationGrid":
        return cls(np.zeros((n_cells, n_candidates)), 0)


def correlate_direct(r, theta: int, f_o: float, ref_240k=None, fs: float = FS_LOW) -> complex:
    """Direct evaluation of the correlation metric at one lag and frequency."""
    s = waveforms().ref_240k if ref_240k is None else np.asarray(ref_240k)
    r = np.asarray(r)
    if theta < 0 or theta + len(s) > len(r):
        raise IndexError(f"lag {theta} needs samples up to {theta + len(s) - 1}, have {len(r)}")
    k = np.arange(len(s))
    return complex(np.sum(r[theta : theta + len(s)] * np.conj(s) * np.exp(-2j * np.pi * f_o * k / fs)))


def process_block(block, bank: ReferenceBank, cfg: OlsConfig = OlsConfig()) -> np.ndarray:
    """Correlate one N-sample block against every reference row.

    Returns an (n_candidates, step) complex array: entry [i, m] is the
    correlation at block-relative lag m for candidate i.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.shape != (cfg.fft_size,):
        raise ValueError(f"block must have {cfg.fft_size} samples, got {block.shape}")
    spec = spectral.dft_forward(block)
    y = spectral.dft_inverse(spectral.pointwise_product(bank.spectra, spec.bins[np.newaxis, :]))
    return y[:, : cfg.step]


def accumulate_subframe(grid: CorrelationGrid, subframe_corr, cfg: OlsConfig = OlsConfig()) -> CorrelationGrid:
    """Max-pool lag pairs, square and add into the accumulator.

    ``subframe_corr`` is (n_candidates, N_s) of |C| for one 10 ms window.
    """
    mag = np.asarray(subframe_corr, dtype=float)
    n_cand = grid.acc.shape[1]
    if mag.shape != (n_cand, cfg.samples_per_subframe):
        raise ValueError(f"expected shape {(n_cand, cfg.samples_per_subframe)}, got {mag.shape}")
    d = cfg.grid_downsample
    pooled = mag[:, 0::d]
    for i in range(1, d):
        pooled = np.maximum(pooled, mag[:, i::d])
    pooled = pooled.T
    if pooled.shape != grid.acc.shape:
        raise ValueError(f"grid shape {grid.acc.shape} does not match pooled shape {pooled.shape}")
    base = grid.acc if cfg.decay is None else cfg.decay * grid.acc
    return CorrelationGrid(base + pooled * pooled, grid.subframes_combined + 1)


@dataclass
class OlsStream:
    """Streaming state: pending input, computed-but-unemitted lags, counters.

    Window j (lags [j*N_s, (j+1)*N_s)) is complete once the input reaches
    roughly (j+1)*N_s + step, so each window is emitted one push later than
    the samples it starts from.
    """

    bank: ReferenceBank
    cfg: OlsConfig = OlsConfig()
    fft_calls: int = 0
    ifft_calls: int = 0
    _buf: np.ndarray = field(default=None, repr=False)
    _buf_start: int = 0  # absolute index of _buf[0]
    _next_block: int = 0
    _lags: np.ndarray = field(default=None, repr=False)
    _lag_start: int = 0  # absolute lag of _lags[:, 0]
    _next_window: int = 0

    def __post_init__(self):
        n_cand = self.bank.spectra.shape[0]
        self._buf = np.zeros(self.cfg.overlap, dtype=np.complex128)  # zero prefix
        self._buf_start = -self.cfg.overlap
        self._lags = np.zeros((n_cand, 0))
        self._lag_start = 0

    @property
    def samples_seen(self) -> int:
        return self._buf_start + len(self._buf)

    def push(self, samples) -> list[np.ndarray]:
        """Feed samples; return the |C| windows (n_candidates, N_s) completed."""
        cfg = self.cfg
        self._buf = np.concatenate((self._buf, np.asarray(samples, dtype=np.complex128)))
        new = []
        while True:
            start = self._next_block * cfg.step - cfg.overlap
            off = start - self._buf_start
            if off + cfg.fft_size > len(self._buf):
                break
            out = process_block(self._buf[off : off + cfg.fft_size], self.bank, cfg)
            self.fft_calls += 1
            self.ifft_calls += out.shape[0]
            lag0 = start
            mag = np.abs(out)
            if lag0 < 0:  # lags before the session start come from the zero prefix
                mag = mag[:, -lag0:]
                lag0 = 0
            new.append(mag)
            self._next_block += 1
        if new:
            self._lags = np.concatenate([self._lags] + new, axis=1)
        # drop consumed input; the next block starts N_O before its step boundary
        keep = self._next_block * cfg.step - cfg.overlap - self._buf_start
        if keep > 0:
            self._buf = self._buf[keep:]
            self._buf_start += keep
        windows = []
        ns = cfg.samples_per_subframe
        while self._lag_start + self._lags.shape[1] >= (self._next_window + 1) * ns:
            lo = self._next_window * ns - self._lag_start
            windows.append(self._lags[:, lo : lo + ns])
            self._next_window += 1
        drop = self._next_window * ns - self._lag_start
        if drop > 0:
            self._lags = self._lags[:, drop:]
            self._lag_start += drop
        return windows


def new_stream(grid: FrequencyGrid | None = None, cfg: OlsConfig = OlsConfig()) -> OlsStream:
    grid = grid or frequency_grid(fft_size=cfg.fft_size)
    return OlsStream(bank=reference_bank(grid=grid, fft_size=cfg.fft_size), cfg=cfg)


def stream_subframe(samples, state: OlsStream) -> tuple[OlsStream, np.ndarray | None]:
    """Push one subframe; return the state and the window it completed, if any."""
    windows = state.push(samples)
    if len(windows) > 1:  # only possible when pushes are larger than a subframe
        raise ValueError("push at most one subframe per call")
    return state, (windows[0] if windows else None)


def grid_to_csv(path, grid: CorrelationGrid) -> None:
    acc = grid.acc
    with open(path, "w") as fh:
        fh.write("lag_cell,candidate,value\n")
        for lag in range(acc.shape[0]):
            for cand in range(acc.shape[1]):
                fh.write(f"{lag},{cand},{acc[lag, cand]:.12g}\n")
