"""Hand anthropometry from silhouette images, plus the statistics used to
judge surveyor accuracy and keyboard fit."""

__version__ = "0.1.0"

from .config import MeasureConfig, PreprocessConfig
from .errors import (
    CatalogError,
    CohortError,
    DesignError,
    PairingError,
    PalmetricError,
    PipelineError,
)
from .landmarks import HandLandmarks, HandMeasurements, measure_hand
from .raster import BinaryImage, ColorImage, GrayImage, KernelSpec, preprocess

__all__ = [
    "BinaryImage",
    "CatalogError",
    "CohortError",
    "ColorImage",
    "DesignError",
    "GrayImage",
    "HandLandmarks",
    "HandMeasurements",
    "KernelSpec",
    "MeasureConfig",
    "PairingError",
    "PalmetricError",
    "PipelineError",
    "PreprocessConfig",
    "measure_hand",
    "preprocess",
]
