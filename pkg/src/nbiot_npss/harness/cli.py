"""Command-line entry point: ``python -m nbiot_npss <command>``.

Every command takes ``--config`` (flat key = value file), ``--seed`` and
``--out`` (output directory); results are CSV files with a header row.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .. import channel, frontend, npss
from ..detector import MlDetector, ThresholdTable
from ..olscorr import OlsConfig
from . import complexity as cx
from . import energy
from .config import (
    CalibrateConfig,
    ComplexityConfig,
    ConfigError,
    DetectConfig,
    EnergyConfig,
    GenConfig,
    LatencyConfig,
    dump_config,
    load_config,
)
from .experiments import calibrate, packaged_table_path, run_latency

log = logging.getLogger("nbiot_npss")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_gen(args) -> int:
    cfg = load_config(args.config, GenConfig, {"seed": args.seed})
    ch = channel.ChannelConfig(
        snr_db=cfg.snr_db,
        cfo_hz=cfg.cfo_hz,
        timing_offset_samples=cfg.timing_offset_samples,
        channel_kind=cfg.channel_kind,
        doppler_hz=cfg.doppler_hz,
        seed=cfg.seed,
    )
    stream = channel.ChannelStream(ch, channel.FrameLayout(filler=cfg.filler))
    hi, lo = [], []
    for _ in range(cfg.n_frames):
        h, l = stream.next_subframe()
        hi.append(h)
        lo.append(l)
    out = args.out
    npss.write_iq(out / "stream_1920k.iq", np.concatenate(hi))
    npss.write_iq(out / "stream_240k.iq", np.concatenate(lo))
    wf = npss.waveforms()
    npss.write_csv(out / "npss_1920k.csv", wf.wave_1920k)
    npss.write_csv(out / "npss_ref_240k.csv", wf.ref_240k)
    _write_rows(
        out / "truth.csv",
        ["timing_offset_samples", "npss_start_1920k", "true_start_240k", "cfo_hz", "snr_db", "channel_kind"],
        [[stream.timing_offset, stream.layout.npss_start, repr(stream.true_start_240k), repr(cfg.cfo_hz), repr(cfg.snr_db), cfg.channel_kind]],
    )
    return 0


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config, CalibrateConfig, {"seed": args.seed})
    log.info("calibrating %s over %d runs x %d subframes", ",".join(cfg.detectors), cfg.runs, cfg.max_subframes)
    for kind, table in calibrate(cfg).items():
        table.to_csv(args.out / f"thresholds_{kind}.csv")
    (args.out / "calibrate.cfg").write_text(dump_config(cfg))
    return 0


def cmd_latency(args) -> int:
    cfg = load_config(args.config, LatencyConfig, {"seed": args.seed})
    step = max(1, cfg.trials // 10)
    result = run_latency(cfg, progress=lambda i: (i + 1) % step or log.info("trial %d/%d", i + 1, cfg.trials))
    result.write(args.out)
    (args.out / "latency.cfg").write_text(dump_config(cfg))
    for kind in result.detectors():
        s = result.summary(kind)
        print(f"{kind}: hit_rate={s.hit_rate:.3f} mean={s.mean_ms:.1f} ms p90={s.p90_ms} ms false_locks={s.false_locks}")
    return 0


def cmd_energy(args) -> int:
    cfg = load_config(args.config, EnergyConfig)
    rows = energy.sweep(
        cfg.p_ml_w, cfg.p_rf_min_w, cfg.p_rf_max_w, cfg.points, cfg.asymptote_p_rf_w,
        cfg.p_ac_ratio, cfg.t_ml_s, cfg.t_ac_s,
    )
    energy.write_sweep(args.out / "energy_sweep.csv", rows)
    return 0


def cmd_complexity(args) -> int:
    cfg = load_config(args.config, ComplexityConfig)
    ols = OlsConfig(fft_size=cfg.fft_size, overlap=cfg.overlap, samples_per_subframe=cfg.samples_per_subframe)
    grid = npss.frequency_grid(cfg.n_candidates, cfg.bin_step, cfg.fft_size, cfg.sample_rate_hz)
    report = cx.complexity(ols, grid, cfg.sample_rate_hz)
    cx.write_report(args.out / "complexity.csv", report)
    print(f"total {report.total_mops:.1f} MOPS ({report.counting_convention})")
    return 0


def cmd_detect(args) -> int:
    overrides = {"input": str(args.input) if args.input else None}
    cfg = load_config(args.config, DetectConfig, overrides)
    if not cfg.input:
        raise ConfigError("detect needs an input file (--input or 'input = ...')")
    x = npss.read_iq(cfg.input)
    if cfg.sample_rate_hz == frontend.FS_HIGH:
        x = frontend.decimate_to_240k(x)
    elif cfg.sample_rate_hz != frontend.FS_LOW:
        raise ConfigError(f"sample_rate_hz must be {frontend.FS_HIGH:g} or {frontend.FS_LOW:g}")
    table = ThresholdTable.from_csv(cfg.thresholds_ml or packaged_table_path("ml"))
    det = MlDetector(table=table)
    hit = None
    n_sub = min(len(x) // 2400, cfg.max_subframes + 1)  # one extra push flushes the last window
    for j in range(n_sub):
        hit = det.step(x[j * 2400 : (j + 1) * 2400])
        if hit is not None:
            break
    header = ["run_id", "detected", "subframes_used", "theta_hat", "f_hat_hz", "metric"]
    if hit is None:
        row = [0, 0, det.grid.subframes_combined, "", "", ""]
    else:
        row = [0, 1, hit.subframes_used, hit.theta_hat, repr(hit.f_hat_hz), repr(hit.metric)]
    _write_rows(args.out / "detection.csv", header, [row])
    print(",".join(header))
    print(",".join(str(v) for v in row))
    return 0


COMMANDS = {
    "gen": (cmd_gen, "simulate a received stream and write I/Q plus ground truth"),
    "calibrate": (cmd_calibrate, "per-depth detection thresholds from noise-only runs"),
    "latency": (cmd_latency, "Monte Carlo detection latency for ML and AC detectors"),
    "energy": (cmd_energy, "energy-savings sweep over RF front-end power"),
    "complexity": (cmd_complexity, "analytic operation counts of the correlator"),
    "detect": (cmd_detect, "run the ML detector on a recorded I/Q file"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nbiot_npss", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "detect":
            p.add_argument("--input", type=Path, default=None, help="interleaved float64 I/Q file")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command][0](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
