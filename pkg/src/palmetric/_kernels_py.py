"""Pure-Python (numpy) implementations of the windowed raster kernels.

Used as the fallback when the compiled extension is unavailable (or when
``PALMETRIC_PURE_PYTHON`` is set).  Signatures and semantics are identical
to :mod:`palmetric._kernels`:

* median: window clamped to the image edge (border replication),
* erode:  out-of-bounds counts as background,
* dilate: out-of-bounds contributes nothing.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def median_filter_u8(img: np.ndarray, radius: int) -> np.ndarray:
    k = 2 * radius + 1
    padded = np.pad(img, radius, mode="edge")
    windows = sliding_window_view(padded, (k, k))
    # window size is odd, so the median is an exact sample value
    return np.median(windows, axis=(2, 3)).astype(np.uint8)


def erode_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    k = 2 * radius + 1
    padded = np.pad(mask, radius, mode="constant", constant_values=False)
    windows = sliding_window_view(padded, (k, k))
    return windows.all(axis=(2, 3))


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    k = 2 * radius + 1
    padded = np.pad(mask, radius, mode="constant", constant_values=False)
    windows = sliding_window_view(padded, (k, k))
    return windows.any(axis=(2, 3))
