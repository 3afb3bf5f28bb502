# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled filter kernels: per-pixel window loops for the bilateral and
median filters. Semantics mirror _filters_np exactly (same window
convention, same 0..255 intensity scaling, same reflective padding)."""

import numpy as np

cimport cython
from libc.math cimport exp, sqrt

from ..convolve import reflect_pad


def window_radius(int d):
    if d < 3:
        raise ValueError(f"window diameter must be >= 3, got {d}")
    return d // 2


def bilateral(img, int d, double sigma_color, double sigma_space):
    if sigma_color <= 0 or sigma_space <= 0:
        raise ValueError("sigma_color and sigma_space must be positive")
    cdef int r = d // 2
    cdef const double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[:, :, ::1] padded = np.ascontiguousarray(reflect_pad(np.asarray(img, dtype=np.float64), r))
    cdef int h = src.shape[0]
    cdef int w = src.shape[1]
    cdef int c = src.shape[2]

    cdef double space_coeff = -1.0 / (2.0 * sigma_space * sigma_space)
    cdef double color_coeff = -(255.0 * 255.0) / (2.0 * sigma_color * sigma_color)

    cdef int win = 2 * r + 1
    # exp(spatial + range) = exp(spatial) * exp(range): hoist the spatial
    # factor so the inner loop pays for one exp, not a fused one.
    spatial_np = np.empty(win * win, dtype=np.float64)
    cdef double[::1] spatial = spatial_np
    cdef int dy, dx
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            spatial[(dy + r) * win + (dx + r)] = exp((dy * dy + dx * dx) * space_coeff)

    out_np = np.empty((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_np
    cdef int y, x, ch
    cdef double center, sample, diff, weight, num, den
    with nogil:
        for y in range(h):
            for x in range(w):
                for ch in range(c):
                    center = src[y, x, ch]
                    num = 0.0
                    den = 0.0
                    for dy in range(win):
                        for dx in range(win):
                            sample = padded[y + dy, x + dx, ch]
                            diff = sample - center
                            weight = spatial[dy * win + dx] * exp(diff * diff * color_coeff)
                            num += weight * sample
                            den += weight
                    out[y, x, ch] = num / den
    return out_np


cdef double _select(double* a, int n, int k) noexcept nogil:
    """k-th smallest of a[0..n-1]; reorders the buffer (quickselect)."""
    cdef int lo = 0
    cdef int hi = n - 1
    cdef int i, j
    cdef double pivot, tmp
    while lo < hi:
        pivot = a[(lo + hi) // 2]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                tmp = a[i]
                a[i] = a[j]
                a[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            return a[k]
    return a[k]


def median_filter(img, int k):
    if k < 3 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {k}")
    cdef int r = k // 2
    cdef const double[:, :, ::1] padded = np.ascontiguousarray(reflect_pad(np.asarray(img, dtype=np.float64), r))
    cdef int h = img.shape[0]
    cdef int w = img.shape[1]
    cdef int c = img.shape[2]

    out_np = np.empty((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_np
    buf_np = np.empty(k * k, dtype=np.float64)
    cdef double[::1] buf = buf_np
    cdef int y, x, ch, dy, dx, n = k * k
    cdef int mid = n // 2
    with nogil:
        for y in range(h):
            for x in range(w):
                for ch in range(c):
                    for dy in range(k):
                        for dx in range(k):
                            buf[dy * k + dx] = padded[y + dy, x + dx, ch]
                    out[y, x, ch] = _select(&buf[0], n, mid)
    return out_np
