"""Measurement configuration and config-file handling.

Precedence is: command-line flags > config file > built-in defaults.
The config file is JSON; its path comes from ``--config`` or the
``PALMETRIC_CONFIG`` environment variable.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_CONFIG = "PALMETRIC_CONFIG"

# hand lengths outside this range indicate a pipeline failure, not a hand
MIN_LENGTH_CM = 0.0
MAX_LENGTH_CM = 30.0

SPAN_CHOICES = ("pinky-index", "pinky-thumb", "both")


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of the mask-extraction stages (in application order)."""

    median_radius: int = 1
    threshold: int | None = None  # None selects Otsu
    invert: bool = False
    erode_radius: int = 1
    erode_passes: int = 1
    dilate_radius: int = 1
    dilate_passes: int = 2

    def __post_init__(self):
        for name in ("median_radius", "erode_radius", "dilate_radius"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.erode_passes < 0 or self.dilate_passes < 0:
            raise ValueError("pass counts must be >= 0")
        if self.threshold is not None and not 0 <= self.threshold <= 255:
            raise ValueError("fixed threshold must be in [0, 255]")


@dataclass(frozen=True)
class MeasureConfig:
    """Everything a single image measurement depends on."""

    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    square_side_cm: float = 5.0
    square_tolerance: float = 0.05
    sigma: float = 0.001
    smooth_window: int = 11
    span_fingers: str = "pinky-index"

    def __post_init__(self):
        if self.square_side_cm <= 0:
            raise ValueError("square_side_cm must be positive")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError("sigma must be in (0, 1)")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be an odd integer >= 1")
        if self.span_fingers not in SPAN_CHOICES:
            raise ValueError(f"span_fingers must be one of {SPAN_CHOICES}")


def default_config_path() -> Path | None:
    path = os.environ.get(ENV_CONFIG)
    return Path(path) if path else None


def load_config_file(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    return data


def build_measure_config(file_values: dict | None = None, **flag_values) -> MeasureConfig:
    """Merge defaults, config-file values and explicit flags (flags win).

    Flag values equal to ``None`` are treated as "not given".
    """
    pre_fields = {f.name for f in dataclasses.fields(PreprocessConfig)}
    top_fields = {f.name for f in dataclasses.fields(MeasureConfig)} - {"preprocess"}

    pre: dict = {}
    top: dict = {}
    for source in (file_values or {}), {k: v for k, v in flag_values.items() if v is not None}:
        for key, value in source.items():
            if key in pre_fields:
                pre[key] = value
            elif key in top_fields:
                top[key] = value
            else:
                raise ValueError(f"unknown config key: {key}")
    return MeasureConfig(preprocess=PreprocessConfig(**pre), **top)
