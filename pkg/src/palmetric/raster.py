"""Image types and the mask-extraction stages of the measurement pipeline.

The stages run in a fixed order: grayscale conversion, median filtering,
thresholding, one erosion pass and two dilation passes.  All operations
are pure: they return new images and never mutate their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import PreprocessConfig
from .errors import PipelineError

# ITU-R BT.601 luma weights
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ColorImage:
    """Row-major RGB image, channels unsigned 8-bit."""

    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError("ColorImage expects a (h, w, 3) uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class GrayImage:
    """Row-major intensity image, unsigned 8-bit."""

    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.dtype != np.uint8:
            raise ValueError("GrayImage expects a (h, w) uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class BinaryImage:
    """Row-major foreground mask (True = foreground)."""

    pixels: np.ndarray  # (height, width) bool

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.dtype != np.bool_:
            raise ValueError("BinaryImage expects a (h, w) bool array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class KernelSpec:
    """Square structuring element of side (2*radius + 1)."""

    radius: int = 1

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("kernel radius must be >= 1")


def to_grayscale(img: ColorImage) -> GrayImage:
    """Convert to intensity via BT.601 luma, rounding half up."""
    rgb = img.pixels.astype(np.float64)
    luma = _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
    return GrayImage(np.floor(luma + 0.5).astype(np.uint8))


def median_filter(img: GrayImage, k: KernelSpec = KernelSpec()) -> GrayImage:
    """Median of the (2r+1)x(2r+1) window around each pixel.

    Windows are clamped to the image edge, so dimensions are preserved.
    """
    return GrayImage(kernels.median_filter_u8(img.pixels, k.radius))


def otsu_threshold(img: GrayImage) -> int:
    """Otsu threshold: smallest t in 1..255 maximizing between-class variance.

    Foreground is the class of pixels >= t.  Raises for a single-intensity
    histogram, where no threshold separates anything.
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise PipelineError("binarize", "degenerate histogram: single intensity, Otsu undefined")
    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    # class 0: pixels < t, class 1: pixels >= t, for t in 1..255
    cum0 = np.cumsum(hist)[:-1]  # weight of class 0 at t = index+1
    cumsum0 = np.cumsum(hist * levels)[:-1]
    w0 = cum0 / total
    w1 = 1.0 - w0
    grand = (hist * levels).sum() / total
    valid = (cum0 > 0) & (cum0 < total)
    mu0 = np.where(valid, cumsum0 / np.where(cum0 > 0, cum0, 1.0), 0.0)
    mu1 = np.where(valid, (grand * total - cumsum0) / np.where(total - cum0 > 0, total - cum0, 1.0), 0.0)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(between)) + 1


def binarize(img: GrayImage, threshold: int | None = None, invert: bool = False) -> BinaryImage:
    """Threshold to a mask: pixel >= threshold is foreground.

    ``threshold=None`` selects Otsu's method; ``invert`` flips polarity for
    dark-on-bright scenes.
    """
    t = otsu_threshold(img) if threshold is None else int(threshold)
    mask = img.pixels >= t
    if invert:
        mask = ~mask
    return BinaryImage(mask)


def erode(img: BinaryImage, k: KernelSpec = KernelSpec()) -> BinaryImage:
    """Keep a pixel only if its whole window is foreground (out of bounds counts as background)."""
    return BinaryImage(kernels.erode_mask(img.pixels, k.radius))


def dilate(img: BinaryImage, k: KernelSpec = KernelSpec()) -> BinaryImage:
    """Set a pixel if any pixel of its window is foreground."""
    return BinaryImage(kernels.dilate_mask(img.pixels, k.radius))


def preprocess_stages(img: ColorImage, cfg: PreprocessConfig = PreprocessConfig()) -> list[tuple[str, GrayImage | BinaryImage]]:
    """Run the extraction stages and return each intermediate, in order."""
    gray = to_grayscale(img)
    filtered = median_filter(gray, KernelSpec(cfg.median_radius))
    mask = binarize(filtered, cfg.threshold, cfg.invert)
    stages: list[tuple[str, GrayImage | BinaryImage]] = [
        ("grayscale", gray),
        ("median", filtered),
        ("binary", mask),
    ]
    for _ in range(cfg.erode_passes):
        mask = erode(mask, KernelSpec(cfg.erode_radius))
    stages.append(("eroded", mask))
    for _ in range(cfg.dilate_passes):
        mask = dilate(mask, KernelSpec(cfg.dilate_radius))
    stages.append(("dilated", mask))
    return stages


def preprocess(img: ColorImage, cfg: PreprocessConfig = PreprocessConfig()) -> BinaryImage:
    """Full mask extraction: grayscale, median, threshold, erode, dilate twice."""
    result = preprocess_stages(img, cfg)[-1][1]
    assert isinstance(result, BinaryImage)
    return result
