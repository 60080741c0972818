"""Power-of-two DFT kernels and spectrum helpers.

Convention: unnormalized forward transform, 1/N on the inverse.  All
functions transform along the last axis, so a stack of blocks can be
processed in one call.

Two kernels are available.  ``"numpy"`` (default) delegates to
``numpy.fft``; ``"radix2"`` is an iterative decimation-in-time radix-2
transform written out stage by stage.  Both are checked against a naive
O(N^2) DFT in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KERNELS = ("numpy", "radix2")


class SizingError(ValueError):
    """Transform length is not a power of two (or is too short)."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_length(n: int) -> None:
    if n < 2 or not is_power_of_two(n):
        raise SizingError(f"transform length must be a power of two >= 2, got {n}")


@dataclass(frozen=True)
class Spectrum:
    """DFT bins of a power-of-two length block (last axis)."""

    bins: np.ndarray

    def __post_init__(self) -> None:
        _check_length(self.bins.shape[-1])

    @property
    def n_bins(self) -> int:
        return self.bins.shape[-1]


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 DIT transform along the last axis.

    Bit-reversed reordering followed by log2(N) butterfly stages.  Each
    stage combines pairs of half-size transforms with the twiddles
    exp(-+j*2*pi*k/size).  The inverse applies the 1/N scale.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    _check_length(n)
    a = x[..., _bit_reverse_permutation(n)]
    lead = a.shape[:-1]
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        a = a.reshape(lead + (n // size, size))
        top = a[..., :half]
        bot = a[..., half:] * twiddle
        a = np.concatenate((top + bot, top - bot), axis=-1)
        size *= 2
    a = a.reshape(lead + (n,))
    return a / n if inverse else a


def _forward(x: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "numpy":
        return np.fft.fft(x, axis=-1)
    if kernel == "radix2":
        return fft_radix2(x)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def _inverse(x: np.ndarray, kernel: str) -> np.ndarray:
    if kernel == "numpy":
        return np.fft.ifft(x, axis=-1)
    if kernel == "radix2":
        return fft_radix2(x, inverse=True)
    raise ValueError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def dft_forward(x, kernel: str = "numpy") -> Spectrum:
    """X[m] = sum_k x[k] exp(-j 2 pi k m / N)."""
    x = np.asarray(x, dtype=np.complex128)
    _check_length(x.shape[-1])
    return Spectrum(_forward(x, kernel))


def dft_inverse(X: Spectrum | np.ndarray, kernel: str = "numpy") -> np.ndarray:
    """x[k] = (1/N) sum_m X[m] exp(+j 2 pi k m / N)."""
    bins = X.bins if isinstance(X, Spectrum) else np.asarray(X, dtype=np.complex128)
    _check_length(bins.shape[-1])
    return _inverse(bins, kernel)


def cyclic_shift(X: Spectrum | np.ndarray, d: int) -> Spectrum:
    """Y[m] = X[(m - d) mod N]."""
    bins = X.bins if isinstance(X, Spectrum) else np.asarray(X, dtype=np.complex128)
    n = bins.shape[-1]
    if abs(d) > n:
        raise ValueError(f"|shift| must not exceed N={n}, got {d}")
    return Spectrum(np.roll(bins, d, axis=-1))


def pointwise_product(X: Spectrum | np.ndarray, Y: Spectrum | np.ndarray) -> Spectrum:
    a = X.bins if isinstance(X, Spectrum) else np.asarray(X)
    b = Y.bins if isinstance(Y, Spectrum) else np.asarray(Y)
    return Spectrum(a * b)


def naive_dft(x, inverse: bool = False) -> np.ndarray:
    """O(N^2) direct summation; reference for the fast kernels."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    w = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    out = x @ w.T
    return out / n if inverse else out
