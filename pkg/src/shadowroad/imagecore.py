"""Pixel-grid conventions, color conversion and image file I/O.

Images are plain numpy arrays:

* RGB image: ``float64`` array of shape ``(H, W, 3)``, channels in [0, 1].
* HSV image: ``float64`` array of shape ``(H, W, 3)`` holding (H in degrees,
  S, V). The model is the intensity-based one (V is the channel mean, hue from
  the arccos formula), i.e. what is usually called HSI.
* Gray map: ``float64`` array of shape ``(H, W)``.
* Binary mask: ``bool`` array of shape ``(H, W)``.

8-bit quantization happens only at the file boundary.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "ImageError",
    "ImageReadError",
    "UnsupportedFormatError",
    "DimensionMismatchError",
    "StructuringElement",
    "check_rgb",
    "check_mask",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "to_uint8",
    "from_uint8",
    "load_image",
    "load_mask",
    "save_image",
    "save_mask",
    "save_gray",
]


class ImageError(Exception):
    """Base class for image I/O failures."""


class ImageReadError(ImageError):
    """The file is missing or cannot be read."""


class UnsupportedFormatError(ImageError):
    """The file is not a PNG, PPM (P6) or PGM (P5) image."""


class DimensionMismatchError(ImageError):
    """Two pixel grids that must agree in shape do not."""


@dataclass(frozen=True)
class StructuringElement:
    """A set of ``(dy, dx)`` offsets that always contains the origin."""

    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        offsets = tuple((int(dy), int(dx)) for dy, dx in self.offsets)
        if not offsets:
            raise ValueError("structuring element must not be empty")
        if len(set(offsets)) != len(offsets):
            raise ValueError("structuring element offsets must be distinct")
        if (0, 0) not in offsets:
            raise ValueError("structuring element must contain the origin")
        object.__setattr__(self, "offsets", tuple(sorted(offsets)))

    @classmethod
    def square(cls, size: int = 3) -> "StructuringElement":
        r = _half_size(size)
        return cls(tuple((dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)))

    @classmethod
    def cross(cls, size: int = 3) -> "StructuringElement":
        r = _half_size(size)
        offs = {(d, 0) for d in range(-r, r + 1)} | {(0, d) for d in range(-r, r + 1)}
        return cls(tuple(offs))

    @classmethod
    def parse(cls, text: str) -> "StructuringElement":
        """Build an element from ``"square:N"`` or ``"cross:N"``."""
        shape, sep, size = text.strip().partition(":")
        if not sep or shape not in ("square", "cross"):
            raise ValueError(f"bad structuring element spec {text!r} (want square:N or cross:N)")
        try:
            n = int(size)
        except ValueError:
            raise ValueError(f"bad structuring element size in {text!r}") from None
        return cls.square(n) if shape == "square" else cls.cross(n)

    def reflect(self) -> "StructuringElement":
        return StructuringElement(tuple((-dy, -dx) for dy, dx in self.offsets))

    @property
    def radius(self) -> int:
        return max(max(abs(dy), abs(dx)) for dy, dx in self.offsets)


def _half_size(size: int) -> int:
    if size < 1 or size % 2 == 0:
        raise ValueError(f"structuring element size must be odd and >= 1, got {size}")
    return size // 2


def check_rgb(img) -> np.ndarray:
    """Return ``img`` as a float RGB array, raising ``ValueError`` if invalid."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("RGB channels must lie in [0, 1]")
    return arr


def check_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def rgb_to_hsv(img) -> np.ndarray:
    """Convert an RGB image to (H, S, V) with V the channel mean.

    Black pixels map to (0, 0, 0) and achromatic pixels get hue 0. The hue
    angle is evaluated with ``atan2`` on the same numerator and denominator
    as the arccos form, which avoids the precision loss of ``arccos`` near
    +/-1.
    """
    rgb = np.asarray(img, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    total = r + g + b
    v = total / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(total > 0, 1.0 - 3.0 * np.minimum(np.minimum(r, g), b) / total, 0.0)
    s = np.clip(s, 0.0, 1.0)

    # cos(theta) = num / den with den**2 = num**2 + (sqrt(3)/2 * (g - b))**2
    num = 0.5 * ((r - g) + (r - b))
    sin_part = (np.sqrt(3.0) / 2.0) * np.abs(g - b)
    theta = np.degrees(np.arctan2(sin_part, num))
    h = np.where(b <= g, theta, 360.0 - theta)
    achromatic = (num == 0) & (sin_part == 0)
    h = np.where(achromatic | (h >= 360.0), 0.0, h)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(img) -> np.ndarray:
    """Sector-wise inverse of :func:`rgb_to_hsv`, clipped to [0, 1]."""
    hsv = np.asarray(img, dtype=np.float64)
    h = np.mod(hsv[..., 0], 360.0)
    s, v = hsv[..., 1], hsv[..., 2]
    sector = np.minimum((h // 120.0).astype(int), 2)
    hp = np.radians(h - 120.0 * sector)
    low = v * (1.0 - s)
    high = v * (1.0 + s * np.cos(hp) / np.cos(np.pi / 3.0 - hp))
    rest = 3.0 * v - (low + high)

    out = np.empty(hsv.shape, dtype=np.float64)
    # sector 0: (R, G, B) = (high, rest, low); 1: (low, high, rest); 2: (rest, low, high)
    for k in range(3):
        sel = sector == k
        out[..., k][sel] = high[sel]
        out[..., (k + 1) % 3][sel] = rest[sel]
        out[..., (k + 2) % 3][sel] = low[sel]
    return np.clip(out, 0.0, 1.0)


def to_uint8(arr) -> np.ndarray:
    return np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) / 255.0


_WRITE_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}


def _open(path) -> Image.Image:
    path = Path(path)
    if not path.is_file() or not os.access(path, os.R_OK):
        raise ImageReadError(f"cannot read {path}")
    try:
        im = Image.open(path)
        im.load()
    except UnidentifiedImageError:
        raise UnsupportedFormatError(f"unsupported format: {path}") from None
    except OSError as exc:
        raise ImageReadError(f"cannot read {path}: {exc}") from None
    if im.format not in ("PNG", "PPM"):
        raise UnsupportedFormatError(f"unsupported format {im.format}: {path}")
    return im


def load_image(path) -> np.ndarray:
    """Read a PNG/PPM/PGM file as a float RGB array."""
    im = _open(path)
    return from_uint8(np.asarray(im.convert("RGB")))


def load_mask(path) -> np.ndarray:
    """Read a mask image; pixels >= 128 are foreground."""
    im = _open(path)
    return np.asarray(im.convert("L")) >= 128


def _target_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix not in _WRITE_FORMATS:
        raise UnsupportedFormatError(f"unsupported output format: {path}")
    return _WRITE_FORMATS[suffix]


def save_image(img, path) -> None:
    fmt = _target_format(path)
    if Path(path).suffix.lower() == ".pgm":
        raise UnsupportedFormatError(f"RGB images cannot be written as PGM: {path}")
    Image.fromarray(to_uint8(check_rgb(img))).save(path, format=fmt)


def save_mask(mask, path) -> None:
    """Write a mask as 8-bit gray with 0 (background) and 255 (foreground)."""
    fmt = _target_format(path)
    data = np.where(check_mask(mask), 255, 0).astype(np.uint8)
    if Path(path).suffix.lower() == ".ppm":
        raise UnsupportedFormatError(f"masks must be PGM or PNG: {path}")
    Image.fromarray(data).save(path, format=fmt)


def save_gray(values, path, lo: float, hi: float) -> None:
    """Write a gray map after mapping [lo, hi] affinely onto [0, 255]."""
    fmt = _target_format(path)
    scaled = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
    Image.fromarray(to_uint8(scaled)).save(path, format=fmt)
