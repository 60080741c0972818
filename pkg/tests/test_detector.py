import numpy as np
import pytest
from hypothesis import given, strategies as st

from nbiot_npss import channel, detector, npss
from nbiot_npss.detector import (
    AcDetector,
    MlDetector,
    Peak,
    PeakReport,
    StatisticsError,
    ThresholdTable,
    decide,
    find_peaks,
    fires,
    thresholds_from_statistics,
)
from nbiot_npss.olscorr import CorrelationGrid
from conftest import crandn


def _grid(acc, n=1):
    return CorrelationGrid(np.asarray(acc, float), n)


def test_find_peaks_excludes_neighbouring_lags_for_all_candidates():
    acc = np.ones((100, 5))
    acc[50, 2] = 10  # main event
    acc[51, 4] = 9  # side lobe at an adjacent lag, other candidate
    acc[50, 0] = 8  # same lag, other candidate
    acc[10, 1] = 7
    acc[80, 3] = 6
    acc[30, 0] = 5
    rep = find_peaks(_grid(acc))
    assert [(p.lag, p.candidate, p.value) for p in rep.peaks] == [(50, 2, 10), (10, 1, 7), (80, 3, 6), (30, 0, 5)]
    assert rep.grid_mean == pytest.approx(acc.mean())


def test_find_peaks_exclusion_wraps():
    acc = np.ones((100, 1))
    acc[0, 0], acc[99, 0], acc[98, 0], acc[97, 0] = 10, 9, 8, 7
    rep = find_peaks(_grid(acc), exclusion=2)
    assert [p.lag for p in rep.peaks[:2]] == [0, 97]


def test_find_peaks_needs_data():
    with pytest.raises(ValueError):
        find_peaks(CorrelationGrid.empty())


def _report(values, mean=1.0):
    return PeakReport([Peak(10 * i, i, v) for i, v in enumerate(values)], mean)


def test_decide_needs_both_conditions():
    table = ThresholdTable(np.array([5.0, 4.0]), 0.01, 1.2)
    assert decide(_report([6, 2, 2, 2]), table, 1) is not None
    assert decide(_report([4.5, 2, 2, 2]), table, 1) is None  # below threshold at depth 1
    assert decide(_report([4.5, 2, 2, 2]), table, 2) is not None
    assert decide(_report([6, 5.5, 5.2, 5.1]), table, 1) is None  # not distinct
    hit = decide(_report([6, 2, 2, 2]), table, 1, npss.frequency_grid())
    assert hit.theta_hat == 0 and hit.f_hat_hz == -14_062.5 and hit.metric == 6.0


def _stats(ratio, dist):
    return np.stack([np.asarray(ratio, float), np.asarray(dist, float)], axis=-1)


def test_thresholds_are_kth_largest_when_gate_is_loose():
    rng = np.random.default_rng(0)
    ratio = 1 + rng.exponential(size=(1000, 3))
    dist = np.full((1000, 3), 2.0)  # every run passes D = 1.2
    table = thresholds_from_statistics(_stats(ratio, dist), 0.01)
    np.testing.assert_array_equal(table.distinctness, 1.2)
    for d in range(3):
        assert table.thresholds[d] == np.sort(ratio[:, d])[-10]
    assert np.all(fires(_stats(ratio, dist), table).sum(axis=0) == 10)


def test_gate_is_lowered_where_noise_rarely_reaches_d():
    rng = np.random.default_rng(1)
    ratio = 1 + rng.exponential(size=(2000, 2))
    dist = 1 + rng.exponential(0.02, size=(2000, 2))  # almost never >= 1.2
    table = thresholds_from_statistics(_stats(ratio, dist), 0.01)
    for d in range(2):
        assert table.distinctness[d] == np.sort(dist[:, d])[-40]  # 2 x 1% of 2000 runs
        assert table.distinctness[d] < 1.2
    np.testing.assert_array_equal(fires(_stats(ratio, dist), table).mean(axis=0), 0.01)


@given(st.integers(0, 10_000), st.floats(0.005, 0.2))
def test_calibration_hits_target_on_its_own_data(seed, fa):
    rng = np.random.default_rng(seed)
    ratio = 1 + rng.exponential(size=(2000, 3))
    dist = 1 + rng.exponential(rng.uniform(0.01, 1.0), size=(2000, 3))
    table = thresholds_from_statistics(_stats(ratio, dist), fa)
    k = round(fa * 2000)
    np.testing.assert_array_equal(fires(_stats(ratio, dist), table).sum(axis=0), k)
    assert np.all(table.distinctness <= 1.2) and np.all(table.thresholds >= 1.0)


def test_fa_one_is_all_minimal():
    table = thresholds_from_statistics(np.full((5, 4, 2), 3.0), 1.0)
    np.testing.assert_array_equal(table.thresholds, np.ones(4))
    np.testing.assert_array_equal(table.distinctness, np.ones(4))


def test_too_few_runs():
    with pytest.raises(StatisticsError):
        thresholds_from_statistics(np.ones((999, 2, 2)), 0.01)
    with pytest.raises(StatisticsError):
        detector.calibrate_threshold(100, 5, 0.01)
    with pytest.raises(ValueError):
        thresholds_from_statistics(np.ones((2000, 2, 2)), 0.0)
    with pytest.raises(ValueError):
        thresholds_from_statistics(np.ones((2000, 2)), 0.01)


def test_table_indexing_and_csv(tmp_path):
    table = ThresholdTable(np.array([3.0, 2.5, 2.25]), 0.01, np.array([1.2, 1.2, 1.1]))
    assert table[1] == 3.0 and table[3] == 2.25 and table.max_subframes == 3
    assert table.gate(3) == 1.1
    for bad in (0, 4):
        with pytest.raises(IndexError):
            table[bad]
    table.to_csv(tmp_path / "t.csv")
    back = ThresholdTable.from_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.thresholds, table.thresholds)
    assert back.fa_target == 0.01
    np.testing.assert_array_equal(back.distinctness, [1.2, 1.2, 1.1])
    (tmp_path / "gap.csv").write_text("subframes,threshold,fa_target,distinctness\n1,2,0.01,1.2\n3,2,0.01,1.2\n")
    with pytest.raises(ValueError):
        ThresholdTable.from_csv(tmp_path / "gap.csv")


def test_ac_metric_matches_brute_force(rng):
    x = crandn(rng, 3000)
    n_lags = 50
    got = detector.ac_metric(x, n_lags)
    offs = detector.ac_symbol_offsets()
    w = detector.ac_weights()
    for t in (0, 7, 49):
        want = sum(
            w[l] * sum(x[t + offs[l] + k] * np.conj(x[t + offs[l] + k + 137]) for k in range(137)) for l in range(10)
        )
        assert got[t] == pytest.approx(want, rel=1e-10)


def test_ac_symbol_offsets():
    offs = detector.ac_symbol_offsets()
    assert list(offs[:6]) == [0, 137, 274, 411, 548, 686]
    assert offs[-1] + 137 == 1508
    np.testing.assert_array_equal(detector.ac_weights(), [1, 1, 1, -1, 1, -1, 1, 1, -1, -1])


def _clean_stream(tau, cfo=0.0, snr=np.inf, seed=0, kind="awgn_only"):
    cfg = channel.ChannelConfig(snr_db=snr, cfo_hz=cfo, timing_offset_samples=tau, seed=seed, channel_kind=kind)
    return channel.ChannelStream(cfg)


@pytest.mark.parametrize("tau,cfo", [(0, 0.0), (5000, 3000.0), (19_000, -13_000.0)])
def test_ml_detector_clean_signal(tau, cfo):
    s = _clean_stream(tau, cfo)
    table = ThresholdTable(np.full(10, 3.0))
    det = MlDetector(table=table)
    hit = None
    while hit is None and det.grid.subframes_combined < 5:
        hit = det.step(s.next_subframe()[1])
    assert hit is not None and hit.subframes_used == 1
    truth = (round(s.true_start_240k) % 2400) // 2
    d = (hit.theta_hat - truth) % 1200
    assert min(d, 1200 - d) <= 1
    assert abs(hit.f_hat_hz - cfo) <= 468.75


def test_ml_zero_db_single_subframe_majority():
    grid = npss.frequency_grid()
    good = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        tau, cfo = int(rng.integers(19_200)), float(rng.uniform(-14_000, 14_000))
        s = _clean_stream(tau, cfo, snr=0.0, seed=seed)
        det = MlDetector()
        s_rep = None
        while s_rep is None:
            s_rep = det.update(s.next_subframe()[1])
        top, second = s_rep.peaks[0], s_rep.peaks[1]
        truth = (round(s.true_start_240k) % 2400) // 2
        d = (top.lag - truth) % 1200
        ok = min(d, 1200 - d) <= 1 and top.candidate == grid.nearest(cfo) and top.value >= 2 * second.value
        good += ok
    assert good > 50


@pytest.mark.parametrize("tau", [0, 777, 12_345])
def test_ac_detector_clean_timing(tau):
    s = _clean_stream(tau, 2000.0)
    det = AcDetector(table=ThresholdTable(np.full(10, 2.0), distinctness=1.0))
    hit = None
    while hit is None and det.grid.subframes_combined < 5:
        hit = det.step(s.next_subframe()[0])
    assert hit is not None
    truth = (round(s.true_start_240k) % 2400) // 2
    d = (hit.theta_hat - truth) % 1200
    assert min(d, 1200 - d) <= 8


@given(st.floats(1e-4, 1e4), st.integers(0, 10_000))
def test_decisions_are_scale_invariant(scale, seed):
    s = _clean_stream(int(seed * 7) % 19_200, 1000.0, snr=-6.0, seed=seed)
    subs = [s.next_subframe() for _ in range(3)]
    table = ThresholdTable(np.full(5, 4.0))
    for kind, idx in (("ml", 1), ("ac", 0)):
        a, b = detector.make_detector(kind, table), detector.make_detector(kind, table)
        for sub in subs:
            ha, hb = a.step(sub[idx]), b.step(scale * sub[idx])
            assert (ha is None) == (hb is None)
            if ha is not None:
                assert (ha.theta_hat, ha.candidate) == (hb.theta_hat, hb.candidate)
                assert ha.metric == pytest.approx(hb.metric, rel=1e-9)


def test_noise_statistics_is_indexed_by_run():
    full = detector.noise_statistics(("ml", "ac"), 3, 2, seed=9)
    tail = detector.noise_statistics(("ml", "ac"), 2, 2, seed=9, run_offset=1)
    for k in ("ml", "ac"):
        np.testing.assert_array_equal(full[k][1:], tail[k])
        assert full[k].shape == (3, 2, 2)
        assert np.all(full[k][..., 0] >= 1.0) and np.all(full[k][..., 1] >= 1.0)


def test_make_detector_rejects_unknown():
    with pytest.raises(ValueError):
        detector.make_detector("xcorr")


@pytest.mark.parametrize("tau,cfo", [(2345, 937.5), (15_000, -4687.5)])
def test_detection_is_argmax_of_direct_metric(tau, cfo):
    from nbiot_npss.olscorr import correlate_direct

    s = _clean_stream(tau, cfo)
    lo = np.concatenate([s.next_subframe()[1] for _ in range(3)])
    det = MlDetector(table=ThresholdTable(np.full(5, 3.0)))
    hit = None
    for j in range(3):
        hit = hit or det.step(lo[2400 * j : 2400 * (j + 1)])
    grid = npss.frequency_grid()
    truth = int(s.true_start_240k)
    lags = range(truth - 6, truth + 7)
    metric = np.array([[abs(correlate_direct(lo, t, f)) for f in grid.candidates_hz] for t in lags])
    t_best, c_best = np.unravel_index(np.argmax(metric), metric.shape)
    assert hit.theta_hat == (lags[t_best] % 2400) // 2
    assert hit.candidate == c_best and hit.f_hat_hz == grid.candidates_hz[c_best]
