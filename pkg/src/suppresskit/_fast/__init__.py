"""Backend selection for the hot filter kernels.

The compiled extension is preferred when it imported cleanly; the NumPy
implementations are the fallback. SUPPRESSKIT_KERNEL_BACKEND={cython,numpy}
forces a choice (used by the parity tests and the benchmark). The non-local
means path is offset-vectorized NumPy/SciPy in both backends; only the
per-pixel window loops (bilateral, median) have a compiled twin.
"""

from __future__ import annotations

import os

from . import _filters_np

try:
    from . import _filters_cy
except ImportError:
    _filters_cy = None

_BACKENDS = {"numpy": _filters_np}
if _filters_cy is not None:
    _BACKENDS["cython"] = _filters_cy


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; available: {available_backends()}") from None


_requested = os.environ.get("SUPPRESSKIT_KERNEL_BACKEND")
if _requested:
    _impl = get_backend(_requested)
    BACKEND = _requested
else:
    BACKEND = "cython" if _filters_cy is not None else "numpy"
    _impl = _BACKENDS[BACKEND]

bilateral = _impl.bilateral
median_filter = _impl.median_filter
nlmeans = _filters_np.nlmeans
window_radius = _filters_np.window_radius
