"""Downlink synthesis and impairments at 1.92 MHz, plus decimation to 240 kHz.

SNR convention: ratio of the average NPSS power to the noise power that
remains after the decimation filter, i.e. measured in the 240 kHz band the
detector sees.  NPSS and filler symbols both have unit mean power.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import frontend, npss
from .frontend import DECIMATION, FS_HIGH, StreamingDecimator

FRAME_LEN = 19_200
SUBFRAME_SYMBOLS = 14
SUBFRAMES_PER_FRAME = 10
NPSS_SUBFRAME = 5
GRID_EDGE_HZ = 14_531.25

# Typical Urban 6-tap profile: delay [s], relative power [dB].
TU6_PROFILE = (
    (0.0e-6, -3.0),
    (0.2e-6, 0.0),
    (0.5e-6, -2.0),
    (1.6e-6, -6.0),
    (2.3e-6, -8.0),
    (5.0e-6, -10.0),
)
SOS_PATHS = 32


class ChannelKind(str, enum.Enum):
    AWGN_ONLY = "awgn_only"
    TU_FADING = "tu_fading"


class Filler(str, enum.Enum):
    RANDOM_QPSK_OFDM = "random_qpsk_ofdm"
    SILENCE = "silence"


def _symbol_cps() -> np.ndarray:
    cps = np.full(SUBFRAME_SYMBOLS, npss.CP_NORMAL)
    cps[[0, 7]] = npss.CP_LONG
    return np.tile(cps, SUBFRAMES_PER_FRAME)


def default_npss_start() -> int:
    """Start of NPSS symbol 0 (subframe 5, symbol 3) within the frame."""
    cps = _symbol_cps()
    first = NPSS_SUBFRAME * SUBFRAME_SYMBOLS + npss.FIRST_SUBFRAME_SYMBOL
    return int(np.sum(cps[:first] + npss.SYMBOL_FFT))


@dataclass(frozen=True)
class FrameLayout:
    frame_len_1920k: int = FRAME_LEN
    npss_start: int = default_npss_start()
    filler: Filler = Filler.RANDOM_QPSK_OFDM

    def __post_init__(self):
        if not 0 <= self.npss_start <= self.frame_len_1920k - npss.WAVEFORM_LEN:
            raise ValueError(f"npss_start {self.npss_start} does not fit in the frame")
        object.__setattr__(self, "filler", Filler(self.filler))


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = math.inf
    cfo_hz: float = 0.0
    timing_offset_samples: int | None = None
    channel_kind: ChannelKind = ChannelKind.AWGN_ONLY
    doppler_hz: float = 2.0
    seed: int = 0
    npss_present: bool = True

    def __post_init__(self):
        object.__setattr__(self, "channel_kind", ChannelKind(self.channel_kind))

    @property
    def out_of_grid(self) -> bool:
        return abs(self.cfo_hz) > GRID_EDGE_HZ


def _rng(seed, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def synthesize_frame(layout: FrameLayout, rng: np.random.Generator | None, with_npss: bool = True) -> np.ndarray:
    """One 19,200-sample frame: NPSS at ``layout.npss_start``, filler elsewhere."""
    if layout.frame_len_1920k != FRAME_LEN:
        raise ValueError("only the 10 ms / 19,200-sample frame is supported")
    cps = _symbol_cps()
    if layout.filler is Filler.RANDOM_QPSK_OFDM:
        qpsk = (rng.choice([-1.0, 1.0], size=(len(cps), 12)) + 1j * rng.choice([-1.0, 1.0], size=(len(cps), 12))) / np.sqrt(2)
        bodies = npss.ofdm_symbols(qpsk)
        frame = np.concatenate([np.concatenate((b[-cp:], b)) for b, cp in zip(bodies, cps)])
    else:
        frame = np.zeros(FRAME_LEN, dtype=np.complex128)
    if with_npss:
        frame[layout.npss_start : layout.npss_start + npss.WAVEFORM_LEN] = npss.waveforms().wave_1920k
    return frame


def synthesize_stream(layout: FrameLayout, n_frames: int, seed=0, with_npss: bool = True) -> np.ndarray:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = _rng(seed, 0)
    return np.concatenate([synthesize_frame(layout, rng, with_npss) for _ in range(n_frames)])


def apply_cfo(x, cfo_hz: float, sample_rate: float = FS_HIGH, start_index: int = 0) -> np.ndarray:
    """y[k] = x[k] exp(+j 2 pi cfo k / fs), k counted from ``start_index``."""
    x = np.asarray(x, dtype=np.complex128)
    if cfo_hz == 0:
        return x.copy()
    return x * _phasor(2 * np.pi * cfo_hz / sample_rate, start_index, len(x))


def _phasor(omega: float, start: int, count: int, block: int = 64) -> np.ndarray:
    # exp(j*omega*k) for k = start..start+count-1, factored as coarse x fine
    n_coarse = -(-count // block)
    coarse = np.exp(1j * omega * (start + block * np.arange(n_coarse)))
    fine = np.exp(1j * omega * np.arange(block))
    return np.outer(coarse, fine).ravel()[:count]


class FadingTaps:
    """Sum-of-sinusoids Rayleigh processes, one per tap, unit mean power.

    Each tap is (1/sqrt(M)) sum_m exp(j(2 pi f_d cos(a_m) t + phi_m)) with
    random arrival angles a_m and phases phi_m.  Gains are held constant
    over blocks of at most 256 samples and at least 2,000 blocks per Doppler
    period.
    """

    def __init__(self, profile, doppler_hz: float, rng: np.random.Generator, sample_rate: float = FS_HIGH, fading: bool = True):
        delays = np.array([d for d, _ in profile], dtype=float)
        powers = 10.0 ** (np.array([p for _, p in profile], dtype=float) / 10.0)
        self.delays = np.rint(delays * sample_rate).astype(int)
        self.amps = np.sqrt(powers / powers.sum())
        self.doppler_hz = float(doppler_hz)
        self.sample_rate = sample_rate
        self.fading = fading
        n = len(profile)
        self._freqs = self.doppler_hz * np.cos(rng.uniform(0, 2 * np.pi, (n, SOS_PATHS)))
        self._phases = rng.uniform(0, 2 * np.pi, (n, SOS_PATHS))
        if self.doppler_hz > 0:
            self._step = int(np.clip(sample_rate / (2000 * self.doppler_hz), 1, 256))
        else:
            self._step = 0

    def gains(self, start: int, count: int) -> np.ndarray:
        """(n_taps, count) complex gains for absolute samples start..start+count-1."""
        n = len(self.amps)
        if not self.fading:
            return np.broadcast_to(self.amps[:, None], (n, count)).astype(np.complex128)
        if self._step == 0:
            g = np.exp(1j * self._phases).sum(axis=1) / np.sqrt(SOS_PATHS)
            return np.broadcast_to((self.amps * g)[:, None], (n, count)).copy()
        b0 = start // self._step
        n_blocks = (start + count - 1) // self._step - b0 + 1
        t = (self._step * (b0 + np.arange(n_blocks)) + 0.5 * self._step) / self.sample_rate
        g = np.exp(1j * (2 * np.pi * self._freqs[:, :, None] * t + self._phases[:, :, None])).sum(axis=1)
        g *= self.amps[:, None] / np.sqrt(SOS_PATHS)
        off = start - b0 * self._step
        return np.repeat(g, self._step, axis=1)[:, off : off + count]


class FadingChannel:
    """Streaming tapped delay line; keeps the input tail between calls."""

    def __init__(self, taps: FadingTaps, start_index: int = 0):
        self.taps = taps
        self._hist = np.zeros(int(taps.delays.max()), dtype=np.complex128)
        self._pos = start_index

    def process(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        m = len(self._hist)
        ext = np.concatenate((self._hist, x))
        g = self.taps.gains(self._pos, len(x))
        y = np.zeros(len(x), dtype=np.complex128)
        for i, d in enumerate(self.taps.delays):
            y += g[i] * ext[m - d : m - d + len(x)]
        if m:
            self._hist = ext[-m:]
        self._pos += len(x)
        return y


def tu_fading(x, doppler_hz: float = 2.0, seed=0, sample_rate: float = FS_HIGH, profile=TU6_PROFILE, fading: bool = True) -> np.ndarray:
    """Tapped-delay-line fading; ``fading=False`` gives fixed tap gains sqrt(power)."""
    taps = FadingTaps(profile, doppler_hz, _rng(seed, 1), sample_rate, fading)
    return FadingChannel(taps).process(x)


def noise_sigma2(snr_db: float, signal_power: float = 1.0) -> float:
    """Per-sample noise variance at 1.92 MHz giving ``snr_db`` after the decimation filter."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / (10.0 ** (snr_db / 10.0) * frontend.noise_gain())


def complex_gaussian(rng: np.random.Generator, n: int, sigma2: float) -> np.ndarray:
    return np.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def awgn(x, snr_db: float, seed=0, signal_power: float | None = None) -> np.ndarray:
    """Add circular Gaussian noise at the post-decimation SNR ``snr_db``.

    ``signal_power`` defaults to the mean power of the nonzero samples of x.
    """
    x = np.asarray(x, dtype=np.complex128)
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    if signal_power is None:
        p = np.abs(x) ** 2
        nz = p[p > 0]
        if nz.size == 0:
            raise ValueError("input has zero power; SNR is undefined")
        signal_power = float(nz.mean())
    return x + complex_gaussian(_rng(seed, 2), len(x), noise_sigma2(snr_db, signal_power))


class ChannelStream:
    """Pull-based receiver input: one 10 ms subframe at a time.

    Stream sample i carries frame time i - timing_offset, so the NPSS of
    every frame starts at timing_offset + npss_start (mod 19,200).  The
    simulator runs a little ahead and behind the requested window so the
    zero-phase decimation filter never sees a start-up edge.
    """

    def __init__(self, config: ChannelConfig, layout: FrameLayout = FrameLayout()):
        self.config = config
        self.layout = layout
        seed = config.seed
        tau = config.timing_offset_samples
        if tau is None:
            tau = int(_rng(seed, 3).integers(0, FRAME_LEN))
        self.timing_offset = int(tau)
        self._filler_rng = _rng(seed, 0)
        self._noise_rng = _rng(seed, 2)
        self._sigma2 = noise_sigma2(config.snr_db)
        self._lead = frontend.group_delay() + DECIMATION
        self._gen_pos = -self._lead  # next absolute sample to synthesize
        self._fading = None
        if config.channel_kind is ChannelKind.TU_FADING:
            taps = FadingTaps(TU6_PROFILE, config.doppler_hz, _rng(seed, 1))
            self._fading = FadingChannel(taps, start_index=self._gen_pos)
        self._decim = StreamingDecimator(origin=self._gen_pos)
        self._frames: dict[int, np.ndarray] = {}
        self._hi = np.zeros(0, dtype=np.complex128)  # 1.92 MHz samples from index 0 not yet returned
        self._hi_start = 0
        self._lo = np.zeros(0, dtype=np.complex128)
        self.subframes_emitted = 0

    @property
    def true_start_240k(self) -> float:
        """NPSS start in 240 kHz samples, reduced modulo one subframe."""
        return ((self.timing_offset + self.layout.npss_start) % FRAME_LEN) / DECIMATION

    def _frame(self, idx: int) -> np.ndarray:
        if idx not in self._frames:
            self._frames = {k: v for k, v in self._frames.items() if k >= idx - 1}
            self._frames[idx] = synthesize_frame(self.layout, self._filler_rng, self.config.npss_present)
        return self._frames[idx]

    def _clean(self, start: int, count: int) -> np.ndarray:
        t0 = start - self.timing_offset
        out = np.empty(count, dtype=np.complex128)
        done = 0
        while done < count:
            t = t0 + done
            f, off = divmod(t, FRAME_LEN)
            n = min(FRAME_LEN - off, count - done)
            out[done : done + n] = self._frame(f)[off : off + n]
            done += n
        return out

    def _generate(self, count: int) -> None:
        start = self._gen_pos
        x = self._clean(start, count)
        x = apply_cfo(x, self.config.cfo_hz, FS_HIGH, start_index=start)
        if self._fading is not None:
            x = self._fading.process(x)
        if self._sigma2 > 0:
            x = x + complex_gaussian(self._noise_rng, count, self._sigma2)
        self._gen_pos += count
        lo = self._decim.push(x)
        self._lo = np.concatenate((self._lo, lo))
        if start < 0:
            x = x[-start:]
        self._hi = np.concatenate((self._hi, x))

    def next_subframe(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (19,200 samples at 1.92 MHz, 2,400 samples at 240 kHz)."""
        j = self.subframes_emitted
        need_hi = (j + 1) * FRAME_LEN
        target = need_hi + self._lead
        if self._gen_pos < target:
            self._generate(target - self._gen_pos)
        hi = self._hi[:FRAME_LEN]
        lo = self._lo[:2400]
        self._hi = self._hi[FRAME_LEN:]
        self._lo = self._lo[2400:]
        self.subframes_emitted += 1
        return hi, lo
