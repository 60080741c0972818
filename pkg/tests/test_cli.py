import hashlib

import pytest

from nbiot_npss.harness.cli import main


def _digest(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


def _run_twice(tmp_path, args, config_text=None):
    if config_text is not None:
        (tmp_path / "c.cfg").write_text(config_text)
        args = args + ["--config", str(tmp_path / "c.cfg")]
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(args + ["--out", str(out)]) == 0
        outs.append(_digest(out))
    assert outs[0] == outs[1]
    return tmp_path / "run0"


def test_gen_deterministic(tmp_path):
    out = _run_twice(tmp_path, ["gen", "--seed", "4"], "n_frames = 2\nsnr_db = -3\ncfo_hz = 500\nchannel_kind = tu_fading\n")
    assert (out / "stream_1920k.iq").stat().st_size == 2 * 19_200 * 16
    assert (out / "truth.csv").read_text().startswith("timing_offset_samples,")


def test_gen_seed_changes_output(tmp_path):
    main(["gen", "--seed", "1", "--out", str(tmp_path / "a"), "--config", _cfg(tmp_path)])
    main(["gen", "--seed", "2", "--out", str(tmp_path / "b"), "--config", _cfg(tmp_path)])
    assert _digest(tmp_path / "a")["stream_1920k.iq"] != _digest(tmp_path / "b")["stream_1920k.iq"]


def _cfg(tmp_path):
    p = tmp_path / "noisy.cfg"
    p.write_text("snr_db = 0\n")
    return str(p)


def test_calibrate_deterministic(tmp_path):
    out = _run_twice(tmp_path, ["calibrate", "--seed", "3"], "runs = 10\nmax_subframes = 2\nfa_target = 1.0\ndetectors = ml\n")
    assert (out / "thresholds_ml.csv").read_text().splitlines()[0] == "subframes,threshold,fa_target,distinctness"


def test_latency_deterministic(tmp_path):
    out = _run_twice(tmp_path, ["latency", "--seed", "2"], "trials = 2\nmax_subframes = 3\nsnr_db = 0\n")
    assert (out / "latency_summary.csv").exists()


def test_energy_and_complexity_deterministic(tmp_path):
    _run_twice(tmp_path / "e", ["energy"])
    out = _run_twice(tmp_path / "c", ["complexity"])
    assert "total_mops" in (out / "complexity.csv").read_text()


def test_detect_deterministic(tmp_path):
    main(["gen", "--out", str(tmp_path / "g"), "--config", _gen_cfg(tmp_path)])
    out = _run_twice(tmp_path / "d", ["detect", "--input", str(tmp_path / "g" / "stream_1920k.iq")])
    row = (out / "detection.csv").read_text().splitlines()[1].split(",")
    assert row[1] == "1" and row[3] == "200"


def _gen_cfg(tmp_path):
    p = tmp_path / "gen.cfg"
    # NPSS at (12388 + 10012) mod 19200 = 3200 -> 400 at 240 kHz -> cell 200
    p.write_text("n_frames = 3\nsnr_db = 10\ntiming_offset_samples = 12388\n")
    return str(p)


def test_bad_config_key_exits_nonzero(tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("trails = 3\n")
    assert main(["latency", "--config", str(tmp_path / "bad.cfg"), "--out", str(tmp_path)]) == 2
    assert "trails" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit):
        main(["fly"])
