"""Image representation shared by all modules: decoding, encoding, grayscale
conversion and bilinear resizing.

Pixels are kept as float64 intensities in [0, 1], shape (height, width,
channels) with channels in {1, 3}. Buffers are immutable after construction
so they can be shared freely across parallel workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

# BT.601 luma weights, the dominant convention for RGB -> gray conversion.
_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


class DecodeError(Exception):
    """Raised when an encoded image cannot be decoded."""


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster image: float intensities in [0, 1], 1 or 3 channels."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"empty image: shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("pixel intensities must be finite")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel intensities outside [0, 1]: min={lo}, max={hi}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def plane(self) -> np.ndarray:
        """Single-channel view as a 2-D array; requires channels == 1."""
        if self.channels != 1:
            raise ValueError("plane() requires a single-channel image")
        return self.pixels[:, :, 0]

    def to_uint8(self) -> np.ndarray:
        """8-bit quantization used for encoding: round(v * 255)."""
        return np.round(self.pixels * 255.0).astype(np.uint8)


def decode(data: bytes, name: str = "<bytes>") -> ImageBuffer:
    """Decode PNG or JPEG bytes; 8-bit samples map to float via v / 255.

    Grayscale sources yield channels=1, everything else channels=3.
    """
    try:
        with Image.open(io.BytesIO(data)) as img:
            if img.mode in ("L", "I;16", "I"):
                img = img.convert("L")
            elif img.mode == "LA":
                img = img.convert("L")
            elif img.mode != "RGB":
                img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.float64)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode image {name!r}: {exc}") from exc
    return ImageBuffer(arr / 255.0)


def encode(img: ImageBuffer, format: str = "png", quality: int = 95) -> bytes:
    """Encode to PNG (lossless at 8-bit quantization) or JPEG."""
    fmt = format.lower()
    if fmt not in ("png", "jpeg", "jpg"):
        raise ValueError(f"unsupported format: {format!r}")
    arr = img.to_uint8()
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    if fmt == "png":
        pil.save(buf, format="PNG")
    else:
        if not 1 <= quality <= 100:
            raise ValueError(f"jpeg quality must be in 1..100, got {quality}")
        pil.save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def load_image(path: str | Path) -> ImageBuffer:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DecodeError(f"cannot read image file {str(path)!r}: {exc}") from exc
    return decode(data, name=str(path))


def save_image(img: ImageBuffer, path: str | Path, quality: int = 95) -> None:
    path = Path(path)
    fmt = "jpeg" if path.suffix.lower() in (".jpg", ".jpeg") else "png"
    path.write_bytes(encode(img, format=fmt, quality=quality))


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """BT.601 weighted luma; single-channel input passes through unchanged."""
    if img.channels == 1:
        return img
    gray = img.pixels @ _GRAY_WEIGHTS
    return ImageBuffer(np.clip(gray, 0.0, 1.0))


def gray_plane(img: ImageBuffer) -> np.ndarray:
    """2-D float64 luma array, converting from RGB if needed."""
    return to_grayscale(img).plane()


def resize(img: ImageBuffer, width: int, height: int) -> ImageBuffer:
    """Bilinear resize with half-pixel centers, no antialiasing prefilter."""
    if width < 1 or height < 1:
        raise ValueError(f"target dimensions must be >= 1, got {width}x{height}")
    if width == img.width and height == img.height:
        return img
    src = img.pixels
    h, w = img.height, img.width

    sy = np.clip((np.arange(height) + 0.5) * (h / height) - 0.5, 0.0, h - 1.0)
    sx = np.clip((np.arange(width) + 0.5) * (w / width) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return ImageBuffer(np.clip(out, 0.0, 1.0))
