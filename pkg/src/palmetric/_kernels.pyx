# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels: median filter and binary morphology.

Border conventions match the numpy fallback in ``_kernels_py``:
median clamps to the edge, erosion treats out-of-bounds as background,
dilation ignores out-of-bounds.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def median_filter_u8(const unsigned char[:, ::1] img, int radius):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t y, x, wy, wx, yy, xx, n, i, j
    cdef unsigned char v
    cdef int k = 2 * radius + 1
    out_arr = np.empty((h, w), dtype=np.uint8)
    buf_arr = np.empty(k * k, dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef unsigned char[::1] buf = buf_arr
    cdef Py_ssize_t mid = (k * k) // 2

    for y in range(h):
        for x in range(w):
            n = 0
            for wy in range(-radius, radius + 1):
                yy = y + wy
                if yy < 0:
                    yy = 0
                elif yy >= h:
                    yy = h - 1
                for wx in range(-radius, radius + 1):
                    xx = x + wx
                    if xx < 0:
                        xx = 0
                    elif xx >= w:
                        xx = w - 1
                    buf[n] = img[yy, xx]
                    n += 1
            # insertion sort; windows are small (default 3x3)
            for i in range(1, n):
                v = buf[i]
                j = i - 1
                while j >= 0 and buf[j] > v:
                    buf[j + 1] = buf[j]
                    j -= 1
                buf[j + 1] = v
            out[y, x] = buf[mid]
    return out_arr


def erode_mask(const unsigned char[:, ::1] mask, int radius):
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef Py_ssize_t y, x, wy, wx, yy, xx
    cdef bint keep
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr

    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            keep = True
            for wy in range(-radius, radius + 1):
                yy = y + wy
                if yy < 0 or yy >= h:
                    keep = False
                    break
                for wx in range(-radius, radius + 1):
                    xx = x + wx
                    if xx < 0 or xx >= w or not mask[yy, xx]:
                        keep = False
                        break
                if not keep:
                    break
            if keep:
                out[y, x] = 1
    return out_arr


def dilate_mask(const unsigned char[:, ::1] mask, int radius):
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef Py_ssize_t y, x, wy, wx, y0, y1, x0, x1
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr

    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            y0 = y - radius
            if y0 < 0:
                y0 = 0
            y1 = y + radius + 1
            if y1 > h:
                y1 = h
            x0 = x - radius
            if x0 < 0:
                x0 = 0
            x1 = x + radius + 1
            if x1 > w:
                x1 = w
            for wy in range(y0, y1):
                for wx in range(x0, x1):
                    out[wy, wx] = 1
    return out_arr
