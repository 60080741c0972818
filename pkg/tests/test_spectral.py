import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbiot_npss import spectral
from nbiot_npss.spectral import SizingError, cyclic_shift, dft_forward, dft_inverse, fft_radix2, naive_dft

pow2 = st.integers(min_value=1, max_value=10).map(lambda e: 2**e)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _signal(n, seed):
    r = np.random.default_rng(seed)
    return r.standard_normal(n) + 1j * r.standard_normal(n)


@given(pow2, seeds)
def test_radix2_matches_naive_dft(n, seed):
    x = _signal(n, seed)
    np.testing.assert_allclose(fft_radix2(x), naive_dft(x), atol=1e-9 * n)


@given(pow2, seeds)
def test_radix2_inverse_matches_naive(n, seed):
    x = _signal(n, seed)
    np.testing.assert_allclose(fft_radix2(x, inverse=True), naive_dft(x, inverse=True), atol=1e-9 * n)


@given(pow2, seeds, st.sampled_from(["numpy", "radix2"]))
def test_roundtrip(n, seed, kernel):
    x = _signal(n, seed)
    np.testing.assert_allclose(dft_inverse(dft_forward(x, kernel), kernel), x, atol=1e-10 * n)


@given(pow2, seeds)
def test_parseval(n, seed):
    x = _signal(n, seed)
    X = dft_forward(x).bins
    assert np.isclose(np.sum(np.abs(X) ** 2) / n, np.sum(np.abs(x) ** 2), rtol=1e-10)


@given(pow2, seeds)
def test_kernels_agree(n, seed):
    x = _signal(n, seed)
    np.testing.assert_allclose(dft_forward(x, "radix2").bins, dft_forward(x, "numpy").bins, atol=1e-9 * n)


@given(st.integers(min_value=2, max_value=8).map(lambda e: 2**e), seeds)
def test_circular_convolution_theorem(n, seed):
    x, h = _signal(n, seed), _signal(n, seed + 1)
    direct = np.array([sum(x[m] * h[(k - m) % n] for m in range(n)) for k in range(n)])
    via = dft_inverse(spectral.pointwise_product(dft_forward(x), dft_forward(h)))
    np.testing.assert_allclose(via, direct, atol=1e-9 * n)


@given(pow2, seeds, st.data())
def test_cyclic_shift_is_modulation(n, seed, data):
    d = data.draw(st.integers(min_value=-n, max_value=n))
    x = _signal(n, seed)
    shifted = dft_inverse(cyclic_shift(dft_forward(x), d))
    modulated = x * np.exp(2j * np.pi * d * np.arange(n) / n)
    np.testing.assert_allclose(shifted, modulated, atol=1e-9 * n)


def test_impulse_and_constant():
    x = np.zeros(8, complex)
    x[0] = 1
    np.testing.assert_allclose(fft_radix2(x), np.ones(8))
    np.testing.assert_allclose(fft_radix2(np.ones(8)), 8 * x)


@pytest.mark.parametrize("n", [0, 1, 3, 6, 1000])
def test_non_power_of_two_rejected(n):
    with pytest.raises(SizingError):
        fft_radix2(np.ones(n, complex))


def test_shift_larger_than_n_rejected():
    with pytest.raises(ValueError):
        cyclic_shift(np.ones(8, complex), 9)


def test_unknown_kernel():
    with pytest.raises(ValueError, match="kernel"):
        dft_forward(np.ones(8), kernel="fftw")
