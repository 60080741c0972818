"""NPSS generation: frequency-domain sequence, 1.92 MHz waveform, 240 kHz
reference, frequency-hypothesis grid and the reference spectrum bank."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import spectral
from .frontend import DECIMATION, FS_LOW, lowpass

ZC_LENGTH = 11
ZC_ROOT = 5
CODE_COVER = np.array([1, 1, 1, 1, -1, -1, 1, 1, 1, -1, 1], dtype=float)

SYMBOL_FFT = 128
CP_NORMAL = 9
CP_LONG = 10
# NPSS sits on the last 11 of 14 symbols; subframe symbol 7 (first of the
# second slot) carries the long CP, i.e. NPSS symbol l = 4.
FIRST_SUBFRAME_SYMBOL = 3
LONG_CP_SYMBOL = 7 - FIRST_SUBFRAME_SYMBOL
WAVEFORM_LEN = 1508
REF_LEN = 189


@dataclass(frozen=True)
class NpssFrequencySequence:
    s_freq: np.ndarray  # [subcarrier n, symbol l]
    code_cover: np.ndarray


@dataclass(frozen=True)
class NpssWaveforms:
    wave_1920k: np.ndarray
    ref_240k: np.ndarray


@dataclass(frozen=True)
class FrequencyGrid:
    n_candidates: int
    bin_step: int
    base_spacing_hz: float
    candidates_hz: np.ndarray
    candidate_bin_shifts: np.ndarray

    @property
    def spacing_hz(self) -> float:
        return self.bin_step * self.base_spacing_hz

    @property
    def center(self) -> int:
        return (self.n_candidates - 1) // 2

    def nearest(self, f_hz: float) -> int:
        return int(np.argmin(np.abs(self.candidates_hz - f_hz)))


@dataclass(frozen=True)
class ReferenceBank:
    spectra: np.ndarray  # (n_candidates, fft_size), already conjugated
    fft_size: int


def zadoff_chu_base() -> np.ndarray:
    n = np.arange(ZC_LENGTH)
    return np.exp(-1j * ZC_ROOT * np.pi * n * (n + 1) / ZC_LENGTH)


def generate_npss_frequency() -> NpssFrequencySequence:
    s = np.outer(zadoff_chu_base(), CODE_COVER)
    return NpssFrequencySequence(s_freq=s, code_cover=CODE_COVER.copy())


def subcarrier_bins(count: int = ZC_LENGTH) -> np.ndarray:
    """128-point FFT bins of the first ``count`` subcarriers of the 12-tone block.

    Subcarrier n maps to bin n - 6, so the block spans bins -6..5 around DC.
    """
    return (np.arange(count) - 6) % SYMBOL_FFT


def cp_lengths() -> list[int]:
    return [CP_LONG if l == LONG_CP_SYMBOL else CP_NORMAL for l in range(ZC_LENGTH)]


def ofdm_symbols(tones: np.ndarray) -> np.ndarray:
    """CP-less OFDM bodies for rows of unit-modulus tones, unit mean power."""
    tones = np.atleast_2d(tones)
    spec = np.zeros((tones.shape[0], SYMBOL_FFT), dtype=np.complex128)
    spec[:, subcarrier_bins(tones.shape[1])] = tones
    return spectral.dft_inverse(spec) * (SYMBOL_FFT / np.sqrt(tones.shape[1]))


def ofdm_symbol(tones: np.ndarray, cp: int) -> np.ndarray:
    body = ofdm_symbols(tones)[0]
    return np.concatenate((body[-cp:], body))


def build_waveform_1920k(seq: NpssFrequencySequence | None = None) -> np.ndarray:
    seq = seq or generate_npss_frequency()
    cps = cp_lengths()
    return np.concatenate([ofdm_symbol(seq.s_freq[:, l], cps[l]) for l in range(ZC_LENGTH)])


def build_reference_240k(wave_1920k) -> np.ndarray:
    """Matched-filter the waveform, decimate by 8 and normalize to unit energy.

    The NPSS is filtered in isolation (zero surroundings); sample k of the
    result is aligned with sample 8k of the 1.92 MHz waveform.
    """
    wave = np.asarray(wave_1920k, dtype=np.complex128)
    if len(wave) != WAVEFORM_LEN:
        raise ValueError(f"expected {WAVEFORM_LEN} samples, got {len(wave)}")
    ref = lowpass(wave)[::DECIMATION]
    ref = np.pad(ref, (0, max(0, REF_LEN - len(ref))))[:REF_LEN]
    return ref / np.linalg.norm(ref)


@lru_cache(maxsize=1)
def waveforms() -> NpssWaveforms:
    wave = build_waveform_1920k()
    ref = build_reference_240k(wave)
    wave.setflags(write=False)
    ref.setflags(write=False)
    return NpssWaveforms(wave_1920k=wave, ref_240k=ref)


def frequency_grid(
    n_candidates: int = 31,
    bin_step: int = 4,
    fft_size: int = 1024,
    sample_rate_hz: float = FS_LOW,
) -> FrequencyGrid:
    if n_candidates < 1 or n_candidates % 2 == 0:
        raise ValueError(f"n_candidates must be odd and >= 1, got {n_candidates}")
    if bin_step < 1:
        raise ValueError(f"bin_step must be >= 1, got {bin_step}")
    if not spectral.is_power_of_two(fft_size):
        raise spectral.SizingError(f"fft_size must be a power of two, got {fft_size}")
    base = sample_rate_hz / fft_size
    offsets = np.arange(n_candidates) - (n_candidates - 1) // 2
    shifts = offsets * bin_step
    return FrequencyGrid(
        n_candidates=n_candidates,
        bin_step=bin_step,
        base_spacing_hz=base,
        candidates_hz=shifts * base,
        candidate_bin_shifts=shifts,
    )


def reference_bank(ref_240k=None, grid: FrequencyGrid | None = None, fft_size: int = 1024) -> ReferenceBank:
    """Conjugate reference spectra, one row per frequency candidate.

    Correlating against a reference modulated by +f_o is the same as
    shifting its spectrum up by f_o/bin_width bins, so every row is a
    cyclic shift of the 0 Hz row.
    """
    ref = waveforms().ref_240k if ref_240k is None else np.asarray(ref_240k, dtype=np.complex128)
    grid = grid or frequency_grid(fft_size=fft_size)
    if fft_size < len(ref):
        raise ValueError("fft_size must be at least the reference length")
    padded = np.zeros(fft_size, dtype=np.complex128)
    padded[: len(ref)] = ref
    center = np.conj(spectral.dft_forward(padded).bins)
    rows = np.stack([spectral.cyclic_shift(center, int(d)).bins for d in grid.candidate_bin_shifts])
    rows.setflags(write=False)
    return ReferenceBank(spectra=rows, fft_size=fft_size)


def write_iq(path, x) -> None:
    """Interleaved little-endian float64 I/Q."""
    x = np.asarray(x, dtype=np.complex128)
    inter = np.empty(2 * len(x), dtype="<f8")
    inter[0::2] = x.real
    inter[1::2] = x.imag
    inter.tofile(path)


def read_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f8")
    if len(raw) % 2:
        raise ValueError(f"{path}: odd number of float64 values, not an I/Q stream")
    return raw[0::2] + 1j * raw[1::2]


def write_csv(path, x) -> None:
    x = np.asarray(x, dtype=np.complex128)
    with open(path, "w") as fh:
        fh.write("index,re,im\n")
        for i, v in enumerate(x):
            fh.write(f"{i},{v.real:.17g},{v.imag:.17g}\n")
