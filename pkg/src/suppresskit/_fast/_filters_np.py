"""NumPy implementations of the windowed filter kernels.

These are the import-time fallback when the compiled extension is missing;
the compiled module mirrors their semantics exactly. All functions take and
return (H, W, C) float64 arrays. Intensity-domain parameters (sigma_color,
h) are interpreted on the 0..255 scale, so differences of [0, 1] intensities
are multiplied by 255 inside the kernels.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d

from ..convolve import reflect_pad


def window_radius(d: int) -> int:
    """Neighborhood radius for a diameter-d window (even d rounds up)."""
    if d < 3:
        raise ValueError(f"window diameter must be >= 3, got {d}")
    return d // 2


def bilateral(img: np.ndarray, d: int, sigma_color: float, sigma_space: float) -> np.ndarray:
    if sigma_color <= 0 or sigma_space <= 0:
        raise ValueError("sigma_color and sigma_space must be positive")
    r = window_radius(d)
    h, w, c = img.shape
    padded = reflect_pad(img, r)

    offsets = np.arange(-r, r + 1)
    space_coeff = -1.0 / (2.0 * sigma_space * sigma_space)
    color_coeff = -(255.0 * 255.0) / (2.0 * sigma_color * sigma_color)

    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in offsets:
        for dx in offsets:
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w, :]
            diff = shifted - img
            weight = np.exp(float(dy * dy + dx * dx) * space_coeff + diff * diff * color_coeff)
            num += weight * shifted
            den += weight
    return num / den


def nlmeans(img: np.ndarray, h: float, tws: int, sws: int) -> np.ndarray:
    if h <= 0:
        raise ValueError(f"filter strength must be positive, got {h}")
    if tws % 2 == 0 or sws % 2 == 0:
        raise ValueError("template and search window sizes must be odd")
    rt, rs = tws // 2, sws // 2
    hh, ww, cc = img.shape
    padded = reflect_pad(img, rs + rt)
    # The image padded by rt only; patch differences are averaged over it.
    inner = padded[rs : rs + hh + 2 * rt, rs : rs + ww + 2 * rt, :]
    inv_h2 = -(255.0 * 255.0) / (h * h)

    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in range(-rs, rs + 1):
        for dx in range(-rs, rs + 1):
            shifted = padded[
                rs + dy : rs + dy + hh + 2 * rt,
                rs + dx : rs + dx + ww + 2 * rt,
                :,
            ]
            sq = (inner - shifted) ** 2
            mean_sq = uniform_filter1d(uniform_filter1d(sq, tws, axis=0), tws, axis=1)
            mean_sq = mean_sq[rt : rt + hh, rt : rt + ww, :]
            weight = np.exp(mean_sq * inv_h2)
            num += weight * shifted[rt : rt + hh, rt : rt + ww, :]
            den += weight
    return num / den


def median_filter(img: np.ndarray, k: int, block_rows: int = 32) -> np.ndarray:
    if k < 3 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 3, got {k}")
    r = k // 2
    h = img.shape[0]
    padded = reflect_pad(img, r)
    out = np.empty_like(img)
    # Row blocks keep the k*k sliding view from materializing all at once.
    for y0 in range(0, h, block_rows):
        y1 = min(y0 + block_rows, h)
        windows = sliding_window_view(padded[y0 : y1 + 2 * r], (k, k), axis=(0, 1))
        out[y0:y1] = np.median(windows, axis=(-2, -1))
    return out
