"""Backend selection for the hot raster kernels.

The compiled Cython extension is preferred; the numpy fallback is selected
when the extension is missing or when ``PALMETRIC_PURE_PYTHON`` is set to a
non-empty value.  Both backends implement the same border conventions, and
the test suite asserts they agree bit for bit.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("PALMETRIC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backend() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return BACKEND


def median_filter_u8(img: np.ndarray, radius: int) -> np.ndarray:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if _compiled is not None:
        return np.asarray(_compiled.median_filter_u8(img, radius))
    return _kernels_py.median_filter_u8(img, radius)


def erode_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    if _compiled is not None:
        raw = np.ascontiguousarray(mask, dtype=np.uint8)
        return np.asarray(_compiled.erode_mask(raw, radius)).astype(bool)
    return _kernels_py.erode_mask(np.asarray(mask, dtype=bool), radius)


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    if _compiled is not None:
        raw = np.ascontiguousarray(mask, dtype=np.uint8)
        return np.asarray(_compiled.dilate_mask(raw, radius)).astype(bool)
    return _kernels_py.dilate_mask(np.asarray(mask, dtype=bool), radius)
