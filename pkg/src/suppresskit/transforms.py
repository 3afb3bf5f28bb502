"""Feature-suppressing transforms and the comparison filters.

Shape suppression: patch_shuffle, patch_rotation. Texture suppression:
bilateral, gaussian_blur (plus box_blur, median_filter and nlmeans as
comparison smoothers). Color suppression: grayscale, channel_shuffle.
grid_overlay is the control variant that copies only the patch-seam bands
of a shuffle onto the untouched image. "identity" is accepted as a no-op
kind so baselines can ride through the same dispatch.

Randomized transforms draw from a per-image generator seeded by
FNV-1a-64(image_id) XOR global_seed XOR spec.seed, making corpus runs
reproducible and independent of processing order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _fast
from .convolve import box_kernel, correlate_channels, gaussian_kernel
from .image import ImageBuffer, to_grayscale

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Required parameter names per transform kind.
PARAM_NAMES: dict[str, frozenset[str]] = {
    "patch_shuffle": frozenset({"grid"}),
    "patch_rotation": frozenset({"grid"}),
    "bilateral": frozenset({"d", "sigma_color", "sigma_space"}),
    "gaussian_blur": frozenset({"k", "sigma"}),
    "box_blur": frozenset({"k"}),
    "median_filter": frozenset({"k"}),
    "nlmeans": frozenset({"h", "tws", "sws"}),
    "grayscale": frozenset(),
    "channel_shuffle": frozenset(),
    "grid_overlay": frozenset({"grid"}),
    "identity": frozenset(),
}

SEEDED_KINDS = frozenset({"patch_shuffle", "patch_rotation", "channel_shuffle", "grid_overlay"})

# The five non-identity permutations of (R, G, B), lexicographic.
_CHANNEL_PERMS = tuple(p for p in itertools.permutations(range(3)) if p != (0, 1, 2))


class TransformSpecError(ValueError):
    """Invalid transform kind/parameter combination."""


@dataclass(frozen=True)
class TransformSpec:
    """A named transform with its parameter set and optional seed."""

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in PARAM_NAMES:
            raise TransformSpecError(
                f"unknown transform kind {self.kind!r}; known: {sorted(PARAM_NAMES)}"
            )
        required = PARAM_NAMES[self.kind]
        given = frozenset(self.params)
        if given != required:
            raise TransformSpecError(
                f"{self.kind} requires params {sorted(required)}, got {sorted(given)}"
            )
        p = dict(self.params)
        if "grid" in p:
            if int(p["grid"]) != p["grid"] or p["grid"] < 2:
                raise TransformSpecError(f"grid must be an integer >= 2, got {p['grid']}")
        for name in ("k", "tws", "sws"):
            if name in p:
                v = p[name]
                if int(v) != v or v < 3 or int(v) % 2 == 0:
                    raise TransformSpecError(f"{name} must be an odd integer >= 3, got {v}")
        if "d" in p and (int(p["d"]) != p["d"] or p["d"] < 3):
            raise TransformSpecError(f"d must be an integer >= 3, got {p['d']}")
        for name in ("sigma", "sigma_color", "sigma_space", "h"):
            if name in p and p[name] <= 0:
                raise TransformSpecError(f"{name} must be positive, got {p[name]}")
        if self.seed is not None and not 0 <= int(self.seed) <= _SEED_MASK:
            raise TransformSpecError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        object.__setattr__(self, "params", dict(p))

    def to_json_dict(self) -> dict:
        out: dict = {"kind": self.kind, "params": dict(self.params)}
        if self.seed is not None:
            out["seed"] = int(self.seed)
        return out

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "TransformSpec":
        if "kind" not in obj:
            raise TransformSpecError(f"transform spec missing 'kind': {obj!r}")
        return cls(kind=obj["kind"], params=obj.get("params", {}), seed=obj.get("seed"))


def load_specs(path) -> list[TransformSpec]:
    """Read a JSON file holding one spec object or an array of them."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [TransformSpec.from_json_dict(obj) for obj in data]


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & _SEED_MASK
    return h


def derive_seed(image_id: str, global_seed: int = 0, spec_seed: int | None = None) -> int:
    """Per-image seed: FNV-1a-64(id) XOR global seed XOR spec seed."""
    return fnv1a64(image_id.encode("utf-8")) ^ (global_seed & _SEED_MASK) ^ ((spec_seed or 0) & _SEED_MASK)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_grid(img: ImageBuffer, grid: int) -> None:
    if grid < 2:
        raise TransformSpecError(f"grid must be >= 2, got {grid}")
    if grid > min(img.width, img.height):
        raise TransformSpecError(
            f"grid {grid} exceeds image dimensions {img.width}x{img.height}"
        )


def permute_patches(pixels: np.ndarray, grid: int, perm: np.ndarray) -> np.ndarray:
    """Rearrange grid x grid patches: output patch i holds input patch
    perm[i]. The remainder strip outside grid * (dim // grid) is untouched."""
    ph, pw = pixels.shape[0] // grid, pixels.shape[1] // grid
    out = np.array(pixels)
    for dst, src in enumerate(perm):
        dy, dx = divmod(dst, grid)
        sy, sx = divmod(int(src), grid)
        out[dy * ph : (dy + 1) * ph, dx * pw : (dx + 1) * pw] = pixels[
            sy * ph : (sy + 1) * ph, sx * pw : (sx + 1) * pw
        ]
    return out


def rotate_patches(pixels: np.ndarray, grid: int, quarter_turns: np.ndarray) -> np.ndarray:
    """Rotate each square patch in place by quarter_turns[i] * 90 degrees."""
    side = pixels.shape[0] // grid
    out = np.array(pixels)
    for idx, turns in enumerate(quarter_turns):
        gy, gx = divmod(idx, grid)
        patch = out[gy * side : (gy + 1) * side, gx * side : (gx + 1) * side]
        out[gy * side : (gy + 1) * side, gx * side : (gx + 1) * side] = np.rot90(
            patch, k=int(turns)
        )
    return out


def patch_shuffle(img: ImageBuffer, grid: int, seed: int) -> ImageBuffer:
    """Permute the grid x grid patches uniformly at random.

    Patch size is (H // grid, W // grid); the remainder strip at the right
    and bottom stays in place, so the output size equals the input size and
    the pixel multiset of the shuffled region is preserved exactly.
    """
    _check_grid(img, grid)
    perm = _rng(seed).permutation(grid * grid)
    return ImageBuffer(permute_patches(img.pixels, grid, perm))


def patch_rotation(img: ImageBuffer, grid: int, seed: int) -> ImageBuffer:
    """Rotate each patch independently by 0/90/180/270 degrees in place.

    Quarter-turn rotation needs square patches; non-square inputs are
    center-cropped to the largest grid-divisible square region first, so
    the output may be smaller than the input.
    """
    _check_grid(img, grid)
    side = min(img.height // grid, img.width // grid)
    if side < 1:
        raise TransformSpecError(f"grid {grid} leaves empty patches")
    size = side * grid
    y0 = (img.height - size) // 2
    x0 = (img.width - size) // 2
    region = img.pixels[y0 : y0 + size, x0 : x0 + size]
    quarter_turns = _rng(seed).integers(0, 4, size=grid * grid)
    return ImageBuffer(rotate_patches(region, grid, quarter_turns))


def bilateral(img: ImageBuffer, d: int, sigma_color: float, sigma_space: float) -> ImageBuffer:
    """Edge-preserving smoother over a diameter-d window.

    Weights combine spatial distance (sigma_space, pixels) and intensity
    distance (sigma_color on the 0..255 scale) per channel; even d rounds
    up to the next odd centered window.
    """
    out = _fast.bilateral(img.pixels, int(d), float(sigma_color), float(sigma_space))
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def gaussian_blur(img: ImageBuffer, k: int, sigma: float) -> ImageBuffer:
    kern = gaussian_kernel(int(k), float(sigma))
    out = correlate_channels(img.pixels, kern, kern)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def box_blur(img: ImageBuffer, k: int) -> ImageBuffer:
    kern = box_kernel(int(k))
    out = correlate_channels(img.pixels, kern, kern)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def median_filter(img: ImageBuffer, k: int) -> ImageBuffer:
    return ImageBuffer(_fast.median_filter(img.pixels, int(k)))


def nlmeans(img: ImageBuffer, h: float, tws: int, sws: int) -> ImageBuffer:
    """Non-local means, sigma=0 variant: weights exp(-D^2 / h^2) with D^2 the
    mean squared patch distance on the 0..255 scale."""
    out = _fast.nlmeans(img.pixels, float(h), int(tws), int(sws))
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def grayscale(img: ImageBuffer) -> ImageBuffer:
    return to_grayscale(img)


def channel_shuffle(img: ImageBuffer, seed: int) -> ImageBuffer:
    """Apply one uniformly drawn non-identity permutation of (R, G, B) to
    every pixel, so intensity structure is kept but color correlations are
    destroyed and the output always differs where channels differ."""
    if img.channels != 3:
        raise TransformSpecError("channel_shuffle requires a 3-channel image")
    perm = _CHANNEL_PERMS[int(_rng(seed).integers(0, len(_CHANNEL_PERMS)))]
    return ImageBuffer(img.pixels[:, :, list(perm)])


def boundary_band_mask(height: int, width: int, grid: int) -> np.ndarray:
    """Boolean mask of the 2-pixel bands around interior patch boundaries
    (1 pixel on either side of each seam)."""
    ph, pw = height // grid, width // grid
    mask = np.zeros((height, width), dtype=bool)
    for c in range(1, grid):
        mask[: grid * ph, c * pw - 1 : c * pw + 1] = True
    for r in range(1, grid):
        mask[r * ph - 1 : r * ph + 1, : grid * pw] = True
    return mask


def grid_overlay(img: ImageBuffer, grid: int, seed: int) -> ImageBuffer:
    """Copy only the patch-seam bands of patch_shuffle(img) onto the
    original image: the block-edge artifact without the rearrangement."""
    shuffled = patch_shuffle(img, grid, seed)
    mask = boundary_band_mask(img.height, img.width, grid)
    out = np.array(img.pixels)
    out[mask] = shuffled.pixels[mask]
    return ImageBuffer(out)


def apply_transform(img: ImageBuffer, spec: TransformSpec, seed: int = 0) -> ImageBuffer:
    """Dispatch on spec.kind with an already-derived seed."""
    p = spec.params
    if spec.kind == "identity":
        return img
    if spec.kind == "patch_shuffle":
        return patch_shuffle(img, int(p["grid"]), seed)
    if spec.kind == "patch_rotation":
        return patch_rotation(img, int(p["grid"]), seed)
    if spec.kind == "bilateral":
        return bilateral(img, int(p["d"]), p["sigma_color"], p["sigma_space"])
    if spec.kind == "gaussian_blur":
        return gaussian_blur(img, int(p["k"]), p["sigma"])
    if spec.kind == "box_blur":
        return box_blur(img, int(p["k"]))
    if spec.kind == "median_filter":
        return median_filter(img, int(p["k"]))
    if spec.kind == "nlmeans":
        return nlmeans(img, p["h"], int(p["tws"]), int(p["sws"]))
    if spec.kind == "grayscale":
        return grayscale(img)
    if spec.kind == "channel_shuffle":
        return channel_shuffle(img, seed)
    if spec.kind == "grid_overlay":
        return grid_overlay(img, int(p["grid"]), seed)
    raise TransformSpecError(f"unhandled transform kind {spec.kind!r}")


def apply(spec: TransformSpec, img: ImageBuffer, image_id: str, global_seed: int = 0) -> ImageBuffer:
    """Apply spec with the per-image seed derivation, so a fixed
    (global_seed, spec, manifest) yields the same corpus in any order."""
    return apply_transform(img, spec, derive_seed(image_id, global_seed, spec.seed))
