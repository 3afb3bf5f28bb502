"""Suppression-validation metrics.

Four image-pair scores, all computed on grayscale and normalized into
[0, 1] against the untransformed image:

- lv:    windowed-variance ratio, a fine-texture presence proxy
- hfe:   high-frequency spectral energy ratio
- essim: SSIM between extended-Sobel gradient magnitude maps
- gc:    Pearson correlation of axis gradients

Texture aggregates (lv, hfe) and Shape aggregates (essim, gc), arithmetic
mean by default with a harmonic variant for comparison. Ratios where the
reference image carries none of the feature (zero denominator) are defined
as 1: nothing was present, nothing was destroyed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .convolve import gaussian_kernel, sep_correlate2d, sobel_magnitude
from .image import ImageBuffer, gray_plane
from .transforms import TransformSpec, apply

log = logging.getLogger(__name__)

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2

METRIC_FIELDS = ("lv", "hfe", "essim", "gc", "texture", "shape")


@dataclass(frozen=True)
class MetricParams:
    """w: variance window, r: frequency radius, k: Sobel kernel size."""

    w: int = 11
    r: int = 11
    k: int = 11

    def __post_init__(self):
        if self.w < 2:
            raise ValueError(f"variance window must be >= 2, got {self.w}")
        if self.r < 1:
            raise ValueError(f"frequency radius must be >= 1, got {self.r}")
        if self.k < 3 or self.k % 2 == 0:
            raise ValueError(f"Sobel size must be odd and >= 3, got {self.k}")


@dataclass(frozen=True)
class MetricReport:
    lv: float
    hfe: float
    essim: float
    gc: float
    texture: float
    shape: float

    @classmethod
    def compose(cls, lv: float, hfe: float, essim: float, gc: float,
                aggregate: str = "arithmetic") -> "MetricReport":
        pair = _PAIR_MEANS[aggregate]
        return cls(lv=lv, hfe=hfe, essim=essim, gc=gc,
                   texture=pair(lv, hfe), shape=pair(essim, gc))

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


def arithmetic_mean(a: float, b: float) -> float:
    return (a + b) / 2.0


def harmonic_mean(a: float, b: float) -> float:
    if a + b == 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


_PAIR_MEANS: dict[str, Callable[[float, float], float]] = {
    "arithmetic": arithmetic_mean,
    "harmonic": harmonic_mean,
}


def _clamped_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0
    return min(1.0, num / den)


def _check_dims(x: ImageBuffer, xt: ImageBuffer) -> None:
    if (x.height, x.width) != (xt.height, xt.width):
        raise ValueError(
            f"image dimensions differ: {x.height}x{x.width} vs {xt.height}x{xt.width}"
        )


def windowed_variance(plane: np.ndarray, w: int) -> float:
    """Mean population variance over non-overlapping w x w windows tiled
    from the top-left; partial windows at the right/bottom are discarded."""
    h, wid = plane.shape
    ny, nx = h // w, wid // w
    if ny < 1 or nx < 1:
        raise ValueError(f"window {w} exceeds image dimensions {h}x{wid}")
    tiles = plane[: ny * w, : nx * w].reshape(ny, w, nx, w).transpose(0, 2, 1, 3)
    return float(tiles.reshape(ny, nx, w * w).var(axis=2).mean())


def local_variance_ratio(x: ImageBuffer, xt: ImageBuffer, w: int = 11) -> float:
    _check_dims(x, xt)
    ref = windowed_variance(gray_plane(x), w)
    sup = windowed_variance(gray_plane(xt), w)
    return _clamped_ratio(sup, ref)


def high_frequency_fraction(plane: np.ndarray, r: int) -> float:
    """Fraction of spectral energy at distance > r from the centered DC bin."""
    spectrum = np.fft.fftshift(np.fft.fft2(plane))
    energy = np.abs(spectrum) ** 2
    h, w = plane.shape
    yy, xx = np.ogrid[:h, :w]
    dist_sq = (yy - h // 2) ** 2 + (xx - w // 2) ** 2
    total = float(energy.sum())
    if total == 0.0:
        return 0.0
    return float(energy[dist_sq > r * r].sum()) / total


def high_frequency_energy_ratio(x: ImageBuffer, xt: ImageBuffer, r: int = 11) -> float:
    _check_dims(x, xt)
    ref = high_frequency_fraction(gray_plane(x), r)
    sup = high_frequency_fraction(gray_plane(xt), r)
    return _clamped_ratio(sup, ref)


def ssim_mean(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM over the valid region, 11x11 Gaussian window (sigma 1.5),
    C1=(0.01 L)^2, C2=(0.03 L)^2 with data range L=1."""
    if min(a.shape) < _SSIM_WINDOW:
        raise ValueError(f"images too small for the {_SSIM_WINDOW}x{_SSIM_WINDOW} SSIM window")
    kern = gaussian_kernel(_SSIM_WINDOW, _SSIM_SIGMA)

    def filt(p: np.ndarray) -> np.ndarray:
        return sep_correlate2d(p, kern, kern)

    mu_a = filt(a)
    mu_b = filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    ssim_map = num / den
    crop = _SSIM_WINDOW // 2
    return float(ssim_map[crop:-crop, crop:-crop].mean())


def edge_ssim(x: ImageBuffer, xt: ImageBuffer, k: int = 11) -> float:
    _check_dims(x, xt)
    map_ref = sobel_magnitude(gray_plane(x), k)
    map_sup = sobel_magnitude(gray_plane(xt), k)
    return float(np.clip(ssim_mean(map_ref, map_sup), 0.0, 1.0))


def central_gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences along x and y with replicated edge samples."""
    px = np.pad(plane, ((0, 0), (1, 1)), mode="edge")
    py = np.pad(plane, ((1, 1), (0, 0)), mode="edge")
    gx = (px[:, 2:] - px[:, :-2]) / 2.0
    gy = (py[2:, :] - py[:-2, :]) / 2.0
    return gx, gy


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation with the degenerate-variance convention:
    both constant -> 1, exactly one constant -> 0."""
    a = a.ravel()
    b = b.ravel()
    am = a - a.mean()
    bm = b - b.mean()
    va = float(am @ am)
    vb = float(bm @ bm)
    if va == 0.0 and vb == 0.0:
        return 1.0
    if va == 0.0 or vb == 0.0:
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    return float(am @ bm) / np.sqrt(va * vb)


def gradient_correlation(x: ImageBuffer, xt: ImageBuffer) -> float:
    _check_dims(x, xt)
    gx_ref, gy_ref = central_gradients(gray_plane(x))
    gx_sup, gy_sup = central_gradients(gray_plane(xt))
    value = 0.5 * (pearson(gx_ref, gx_sup) + pearson(gy_ref, gy_sup))
    return float(np.clip(value, 0.0, 1.0))


def report(x: ImageBuffer, xt: ImageBuffer, params: MetricParams = MetricParams(),
           aggregate: str = "arithmetic") -> MetricReport:
    return MetricReport.compose(
        lv=local_variance_ratio(x, xt, params.w),
        hfe=high_frequency_energy_ratio(x, xt, params.r),
        essim=edge_ssim(x, xt, params.k),
        gc=gradient_correlation(x, xt),
        aggregate=aggregate,
    )


@dataclass
class CorpusMetrics:
    per_image: dict[str, MetricReport]
    aggregate: MetricReport
    failures: list[tuple[str, str]]


def aggregate_reports(reports: dict[str, MetricReport], aggregate: str = "arithmetic") -> MetricReport:
    """Mean of the four base metrics in image-id sort order, recomposed so
    the aggregate row satisfies the same pair-mean identity as every row."""
    if not reports:
        raise ValueError("no reports to aggregate")
    ordered = [reports[key] for key in sorted(reports)]
    n = len(ordered)
    sums = {name: 0.0 for name in ("lv", "hfe", "essim", "gc")}
    for rep in ordered:
        for name in sums:
            sums[name] += getattr(rep, name)
    return MetricReport.compose(
        lv=sums["lv"] / n, hfe=sums["hfe"] / n,
        essim=sums["essim"] / n, gc=sums["gc"] / n,
        aggregate=aggregate,
    )


def corpus_metrics(entries: Iterable[tuple[str, ImageBuffer]] | dict[str, ImageBuffer],
                   spec: TransformSpec,
                   params: MetricParams = MetricParams(),
                   global_seed: int = 0,
                   aggregate: str = "arithmetic") -> CorpusMetrics:
    """Per-image reports of spec applied to each image, plus their mean.

    Per-image failures are recorded and skipped; the run continues.
    """
    if isinstance(entries, dict):
        entries = entries.items()
    per_image: dict[str, MetricReport] = {}
    failures: list[tuple[str, str]] = []
    for image_id, img in entries:
        try:
            transformed = apply(spec, img, image_id, global_seed)
            if (transformed.height, transformed.width) != (img.height, img.width):
                # patch_rotation may crop; score against the matching crop.
                y0 = (img.height - transformed.height) // 2
                x0 = (img.width - transformed.width) // 2
                img = ImageBuffer(img.pixels[y0 : y0 + transformed.height,
                                             x0 : x0 + transformed.width])
            per_image[image_id] = report(img, transformed, params, aggregate)
        except Exception as exc:
            log.warning("metrics failed for %s: %s", image_id, exc)
            failures.append((image_id, str(exc)))
    if not per_image:
        raise ValueError("all corpus images failed; nothing to aggregate")
    return CorpusMetrics(per_image=per_image,
                         aggregate=aggregate_reports(per_image, aggregate),
                         failures=failures)


AGGREGATE_ROW_ID = "aggregate"
_CSV_HEADER = ("image_id", "transform", "param_id") + METRIC_FIELDS


def metric_rows(results: dict[str, CorpusMetrics], transforms: dict[str, TransformSpec]) -> list[dict]:
    """Flatten per-(param_id) corpus results into CSV/JSON-ready rows."""
    rows = []
    for param_id in sorted(results):
        corpus = results[param_id]
        kind = transforms[param_id].kind
        for image_id in sorted(corpus.per_image):
            rows.append({"image_id": image_id, "transform": kind, "param_id": param_id,
                         **corpus.per_image[image_id].as_dict()})
        rows.append({"image_id": AGGREGATE_ROW_ID, "transform": kind, "param_id": param_id,
                     **corpus.aggregate.as_dict()})
    return rows


def write_metric_rows_csv(rows: list[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for row in rows:
        writer.writerow([row["image_id"], row["transform"], row["param_id"]]
                        + [format(row[name], ".12g") for name in METRIC_FIELDS])


def write_metric_rows_json(rows: list[dict], fh) -> None:
    json.dump(rows, fh, indent=2)
    fh.write("\n")
