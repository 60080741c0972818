import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbiot_npss import npss
from nbiot_npss.olscorr import (
    CorrelationGrid,
    OlsConfig,
    accumulate_subframe,
    correlate_direct,
    new_stream,
    process_block,
    stream_subframe,
)
from conftest import crandn


def stream_windows(x, chunk=2400):
    st_ = new_stream()
    out = []
    for i in range(0, len(x), chunk):
        out.extend(st_.push(x[i : i + chunk]))
    return st_, out


@given(st.integers(0, 2**31 - 1), st.data())
def test_streamed_matches_direct(seed, data):
    rng = np.random.default_rng(seed)
    x = crandn(rng, 2400 * 3)
    _, wins = stream_windows(x)
    assert len(wins) == 2
    grid = npss.frequency_grid()
    for _ in range(5):
        j = data.draw(st.integers(0, 1))
        lag = data.draw(st.integers(0, 2399))
        cand = data.draw(st.integers(0, 30))
        want = abs(correlate_direct(x, 2400 * j + lag, grid.candidates_hz[cand]))
        assert wins[j][cand, lag] == pytest.approx(want, rel=1e-9)


def test_block_phase_matches_direct(rng):
    x = crandn(rng, 1024)
    bank = npss.reference_bank()
    out = process_block(x, bank)
    grid = npss.frequency_grid()
    for lag in (0, 17, 835):
        for cand in (0, 15, 30):
            assert out[cand, lag] == pytest.approx(correlate_direct(x, lag, grid.candidates_hz[cand]), rel=1e-9)


@pytest.mark.parametrize("chunk", [1, 97, 836, 2400, 5000])
def test_push_size_does_not_change_output(rng, chunk):
    x = crandn(rng, 2400 * 3 + 500)
    _, ref = stream_windows(x, 2400)
    s = new_stream()
    got = []
    for i in range(0, len(x), chunk):
        got.extend(s.push(x[i : i + chunk]))
    assert len(got) == len(ref)
    for a, b in zip(got, ref):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_window_emitted_one_subframe_late(rng):
    s = new_stream()
    s, w = stream_subframe(crandn(rng, 2400), s)
    assert w is None
    s, w = stream_subframe(crandn(rng, 2400), s)
    assert w is not None and w.shape == (31, 2400)


def test_transform_counts(rng):
    s, _ = stream_windows(crandn(rng, 2400 * 4))
    blocks = (2400 * 4 + 188 - 1024) // 836 + 1
    assert s.fft_calls == blocks
    assert s.ifft_calls == 31 * blocks


def test_clean_npss_peak_at_true_lag():
    ref = npss.waveforms().ref_240k
    x = np.zeros(2400 * 3, complex)
    x[3000 : 3000 + 189] = ref
    _, wins = stream_windows(x)
    w = wins[1]
    cand, lag = np.unravel_index(np.argmax(w), w.shape)
    assert (cand, lag) == (15, 600)
    assert w[cand, lag] == pytest.approx(1.0)


def test_direct_out_of_range():
    with pytest.raises(IndexError):
        correlate_direct(np.zeros(200), 12, 0.0)


def test_accumulate_max_pools_pairs():
    cfg = OlsConfig()
    mag = np.zeros((31, 2400))
    mag[3, 10], mag[3, 11] = 2.0, 3.0
    g = accumulate_subframe(CorrelationGrid.empty(), mag, cfg)
    assert g.acc[5, 3] == 9.0 and g.subframes_combined == 1
    g = accumulate_subframe(g, mag, cfg)
    assert g.acc[5, 3] == 18.0 and g.acc.sum() == 18.0


def test_decay():
    cfg = OlsConfig(decay=0.5)
    mag = np.ones((31, 2400))
    g = CorrelationGrid.empty()
    for _ in range(30):
        g = accumulate_subframe(g, mag, cfg)
    np.testing.assert_allclose(g.acc, 2.0, rtol=1e-8)


def test_accumulate_shape_mismatch():
    with pytest.raises(ValueError):
        accumulate_subframe(CorrelationGrid.empty(), np.zeros((31, 2399)))


@pytest.mark.parametrize("kw", [dict(fft_size=1000), dict(overlap=1024), dict(decay=0.0), dict(grid_downsample=7)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OlsConfig(**kw)


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_correlation_scales_linearly(scale, seed):
    x = crandn(np.random.default_rng(seed), 2400 * 2)
    _, a = stream_windows(x)
    _, b = stream_windows(scale * x)
    np.testing.assert_allclose(b[0], scale * a[0], rtol=1e-9)
