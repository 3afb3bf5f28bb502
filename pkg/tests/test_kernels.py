"""Parity between the compiled filter kernels and the NumPy fallback."""

import numpy as np
import pytest

from suppresskit import _fast
from suppresskit._fast import _filters_np

cython_backend = pytest.importorskip(
    "suppresskit._fast._filters_cy", reason="compiled kernels not built"
)


@pytest.fixture
def image(rng):
    return rng.random((37, 29, 3))


def test_backend_registry():
    assert "numpy" in _fast.available_backends()
    assert _fast.get_backend("numpy") is _filters_np
    with pytest.raises(ValueError):
        _fast.get_backend("fortran")


@pytest.mark.parametrize("d,sc,ss", [(5, 170.0, 75.0), (11, 170.0, 75.0), (12, 30.0, 2.0)])
def test_bilateral_parity(image, d, sc, ss):
    a = _filters_np.bilateral(image, d, sc, ss)
    b = cython_backend.bilateral(image, d, sc, ss)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("k", [3, 5, 11])
def test_median_parity_bitwise(image, k):
    a = _filters_np.median_filter(image, k)
    b = cython_backend.median_filter(image, k)
    # Odd k*k windows select one element, so results match exactly.
    assert np.array_equal(a, b)


def test_median_blocked_rows_match_unblocked(image):
    a = _filters_np.median_filter(image, 5, block_rows=4)
    b = _filters_np.median_filter(image, 5, block_rows=1000)
    assert np.array_equal(a, b)


def test_read_only_input_accepted(image):
    image.flags.writeable = False
    cython_backend.bilateral(image, 5, 170.0, 75.0)
    cython_backend.median_filter(image, 3)


def test_window_radius_convention():
    assert _filters_np.window_radius(11) == 5
    assert _filters_np.window_radius(12) == 6
    with pytest.raises(ValueError):
        _filters_np.window_radius(2)
