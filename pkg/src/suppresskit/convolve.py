"""Separable correlation helpers and kernel builders.

One border policy everywhere: edge-inclusive reflection ("symmetric"
padding), which keeps normalized smoothing kernels exactly mean-preserving.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

# scipy's "reflect" mode is edge-inclusive reflection: (d c b a | a b c d).
_BORDER = "reflect"


def sep_correlate2d(plane: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Correlate a 2-D array with a separable kernel (rows kx, columns ky)."""
    out = correlate1d(plane, kx, axis=1, mode=_BORDER, output=np.float64)
    return correlate1d(out, ky, axis=0, mode=_BORDER, output=np.float64)


def correlate_channels(img: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Apply sep_correlate2d per channel of an (H, W, C) array."""
    out = np.empty_like(img, dtype=np.float64)
    for c in range(img.shape[2]):
        out[:, :, c] = sep_correlate2d(img[:, :, c], kx, ky)
    return out


def reflect_pad(img: np.ndarray, ry: int, rx: int | None = None) -> np.ndarray:
    """Pad the two leading axes with edge-inclusive reflection."""
    if rx is None:
        rx = ry
    widths = [(ry, ry), (rx, rx)] + [(0, 0)] * (img.ndim - 2)
    return np.pad(img, widths, mode="symmetric")


def gaussian_kernel(k: int, sigma: float) -> np.ndarray:
    """Sampled k-tap Gaussian, normalized to sum 1."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = k // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def box_kernel(k: int) -> np.ndarray:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    return np.full(k, 1.0 / k)


def _binomial_row(n: int) -> np.ndarray:
    row = np.array([1.0])
    for _ in range(n - 1):
        row = np.convolve(row, [1.0, 1.0])
    return row


def sobel_kernels(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Extended Sobel pair of size k: (smoothing, derivative).

    Smoothing is the binomial row normalized to sum 1; the derivative tap is
    the binomial difference scaled for unit response on a unit-slope ramp,
    so gradient magnitudes of [0, 1] images stay on an order-one scale.
    """
    if k < 3 or k % 2 == 0:
        raise ValueError(f"Sobel size must be odd and >= 3, got {k}")
    smooth = _binomial_row(k)
    smooth = smooth / smooth.sum()
    deriv = np.convolve(_binomial_row(k - 1), [1.0, -1.0])
    positions = np.arange(k) - k // 2
    gain = float(np.dot(positions, deriv))
    return smooth, deriv / gain


def sobel_magnitude(plane: np.ndarray, k: int) -> np.ndarray:
    """Gradient magnitude map from k-sized extended Sobel operators."""
    smooth, deriv = sobel_kernels(k)
    gx = sep_correlate2d(plane, deriv, smooth)
    gy = sep_correlate2d(plane, smooth, deriv)
    return np.sqrt(gx * gx + gy * gy)
