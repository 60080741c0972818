"""Flat ``key = value`` experiment configs.

One setting per line, ``#`` starts a comment.  Keys are the field names of
the matching dataclass below; unknown keys are rejected so that a typo can
never silently fall back to a default.  Tuple-valued keys take
comma-separated lists.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrateConfig:
    runs: int = 2000
    max_subframes: int = 200
    fa_target: float = 0.01
    seed: int = 0
    snr_db: float = -12.6
    channel_kind: str = "awgn_only"
    filler: str = "random_qpsk_ofdm"
    detectors: tuple[str, ...] = ("ml", "ac")
    workers: int = 1


@dataclass(frozen=True)
class LatencyConfig:
    trials: int = 200
    snr_db: float = -12.6
    channel_kind: str = "tu_fading"
    doppler_hz: float = 2.0
    filler: str = "random_qpsk_ofdm"
    max_subframes: int = 200
    seed: int = 1
    detectors: tuple[str, ...] = ("ml", "ac")
    cfo_range_hz: float = 14_531.25
    thresholds_ml: str = ""
    thresholds_ac: str = ""
    timing_tolerance_ml: int = 1
    timing_tolerance_ac: int = 8
    workers: int = 1


@dataclass(frozen=True)
class EnergyConfig:
    p_ml_w: tuple[float, ...] = (0.038, 0.0025)
    p_ac_ratio: float = 0.1
    t_ml_s: float = 0.400
    t_ac_s: float = 0.620
    p_rf_min_w: float = 1e-3
    p_rf_max_w: float = 1.0
    points: int = 61
    asymptote_p_rf_w: float = 1e6


@dataclass(frozen=True)
class ComplexityConfig:
    fft_size: int = 1024
    overlap: int = 188
    samples_per_subframe: int = 2400
    n_candidates: int = 31
    bin_step: int = 4
    sample_rate_hz: float = 240_000.0


@dataclass(frozen=True)
class GenConfig:
    n_frames: int = 1
    snr_db: float = math.inf
    cfo_hz: float = 0.0
    timing_offset_samples: int = 0
    channel_kind: str = "awgn_only"
    doppler_hz: float = 2.0
    filler: str = "random_qpsk_ofdm"
    seed: int = 0


@dataclass(frozen=True)
class DetectConfig:
    input: str = ""
    sample_rate_hz: float = 1_920_000.0
    thresholds_ml: str = ""
    max_subframes: int = 200


def _convert(raw: str, tp, key: str):
    try:
        if tp is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typing.get_origin(tp) is tuple:
            (inner, _) = typing.get_args(tp)
            return tuple(_convert(p.strip(), inner, key) for p in raw.split(",") if p.strip())
        if tp is float:
            return float(raw)
        if tp is int:
            return int(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def parse_config(text: str, cls, overrides: dict | None = None):
    """Build ``cls`` from config text; unknown keys raise ConfigError."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
        values[key] = _convert(raw, hints[key], key)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    return cls(**values)


def load_config(path, cls, overrides: dict | None = None):
    text = Path(path).read_text() if path else ""
    return parse_config(text, cls, overrides)


def dump_config(cfg) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
