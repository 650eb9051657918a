"""Image containers, colour transforms, smoothing and 8-bit PNG I/O.

Samples are float64 throughout; quantisation to bytes only happens in
:func:`save_png`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import correlate1d


class ImageIOError(OSError):
    """File could not be read or written."""


class UnsupportedImageError(ValueError):
    """PNG bit depth or colour type is not handled."""


class ColorSpace(str, enum.Enum):
    RGB = "RGB"
    YCBCR = "YCbCr"
    GRAY = "Gray"


# Full-range BT.601.
_KR, _KG, _KB = 0.299, 0.587, 0.114
_CB_SCALE = 0.564
_CR_SCALE = 0.713


@dataclass(frozen=True)
class Image:
    """Planar image, ``planes`` has shape (channels, height, width)."""

    planes: np.ndarray
    colorspace: ColorSpace

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.float64)
        if planes.ndim != 3:
            raise ValueError(f"planes must be 3-D (C, H, W), got shape {planes.shape}")
        expected = 1 if self.colorspace is ColorSpace.GRAY else 3
        if planes.shape[0] != expected:
            raise ValueError(
                f"{self.colorspace.value} image needs {expected} channel(s), got {planes.shape[0]}"
            )
        object.__setattr__(self, "planes", planes)

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @classmethod
    def from_hwc(cls, array, colorspace=ColorSpace.RGB) -> "Image":
        """Build from a (H, W, C) or (H, W) array as produced by most imaging libraries."""
        a = np.asarray(array, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        return cls(np.moveaxis(a, -1, 0).copy(), ColorSpace(colorspace))

    def to_hwc(self) -> np.ndarray:
        return np.moveaxis(self.planes, 0, -1)


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"region {name} must be an integer")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"region origin must be non-negative, got ({self.x}, {self.y})")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"region extent must be positive, got {self.w}x{self.h}")

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


@dataclass(frozen=True)
class Mask:
    """Per-pixel opacity in [0, 1], shape (height, width)."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.clip(np.asarray(self.alpha, dtype=np.float64), 0.0, 1.0)
        if a.ndim != 2:
            raise ValueError("mask alpha must be 2-D")
        object.__setattr__(self, "alpha", a)

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @classmethod
    def from_region(cls, width: int, height: int, region: Region) -> "Mask":
        a = np.zeros((height, width))
        a[region.slices()] = 1.0
        return cls(a)

    def binary(self, threshold: float = 0.5) -> np.ndarray:
        return self.alpha >= threshold


def load_png(path) -> Image:
    """Read an 8-bit RGB(A) or grayscale PNG.

    Alpha is flattened over white. Palette images are expanded to RGB.
    """
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            fmt, mode = im.format, im.mode
            if fmt != "PNG":
                raise UnsupportedImageError(f"{path}: not a PNG file (format {fmt})")
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise UnsupportedImageError(f"{path}: only 8-bit PNGs are supported (mode {mode})")
            if mode == "P":
                im = im.convert("RGBA")
                mode = "RGBA"
            if mode in ("RGBA", "LA"):
                a = np.asarray(im, dtype=np.float64)
                alpha = a[..., -1:] / 255.0
                a = a[..., :-1] * alpha + 255.0 * (1.0 - alpha)
                cs = ColorSpace.RGB if mode == "RGBA" else ColorSpace.GRAY
                return Image.from_hwc(a, cs)
            if mode == "L":
                return Image.from_hwc(np.asarray(im), ColorSpace.GRAY)
            if mode == "1":
                return Image.from_hwc(np.asarray(im.convert("L")), ColorSpace.GRAY)
            if mode == "RGB":
                return Image.from_hwc(np.asarray(im), ColorSpace.RGB)
            raise UnsupportedImageError(f"{path}: unsupported PNG mode {mode}")
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    except PILImage.UnidentifiedImageError as exc:
        raise ImageIOError(f"cannot decode {path}: {exc}") from exc


def quantize(values) -> np.ndarray:
    """Round half away from zero, clamp to [0, 255], return uint8."""
    v = np.asarray(values, dtype=np.float64)
    r = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)


def save_png(img: Image, path) -> None:
    if img.colorspace is ColorSpace.YCBCR:
        raise ValueError("convert YCbCr images to RGB before saving")
    data = quantize(img.to_hwc())
    if img.colorspace is ColorSpace.GRAY:
        pil = PILImage.fromarray(data[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(data, mode="RGB")
    try:
        pil.save(Path(path), format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def save_mask(mask: Mask | np.ndarray, path) -> None:
    """Write a mask as 8-bit grayscale, 255 = opaque / tampered."""
    alpha = mask.alpha if isinstance(mask, Mask) else np.asarray(mask, dtype=np.float64)
    save_png(Image(alpha[None] * 255.0, ColorSpace.GRAY), path)


def load_mask(path) -> Mask:
    img = load_png(path)
    if img.colorspace is ColorSpace.RGB:
        plane = img.planes.mean(axis=0)
    else:
        plane = img.planes[0]
    return Mask(plane / 255.0)


def rgb_to_ycbcr(img: Image) -> Image:
    if img.colorspace is not ColorSpace.RGB:
        raise ValueError(f"expected RGB image, got {img.colorspace.value}")
    r, g, b = img.planes
    y = _KR * r + _KG * g + _KB * b
    cb = 128.0 + (b - y) * _CB_SCALE
    cr = 128.0 + (r - y) * _CR_SCALE
    return Image(np.stack([y, cb, cr]), ColorSpace.YCBCR)


def ycbcr_to_rgb(img: Image) -> Image:
    if img.colorspace is not ColorSpace.YCBCR:
        raise ValueError(f"expected YCbCr image, got {img.colorspace.value}")
    y, cb, cr = img.planes
    b = y + (cb - 128.0) / _CB_SCALE
    r = y + (cr - 128.0) / _CR_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    return Image(np.stack([r, g, b]), ColorSpace.RGB)


def to_gray(img: Image) -> np.ndarray:
    """Luma plane (BT.601 weights); Y for YCbCr input."""
    if img.colorspace is ColorSpace.GRAY:
        return img.planes[0]
    if img.colorspace is ColorSpace.YCBCR:
        return img.planes[0]
    r, g, b = img.planes
    return _KR * r + _KG * g + _KB * b


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled, unit-sum Gaussian with radius ceil(3*sigma)."""
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth(img: Image, sigma: float) -> Image:
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return img
    k = gaussian_kernel(sigma)
    # mode="reflect" is the mirror extension d c b a | a b c d.
    out = correlate1d(img.planes, k, axis=1, mode="reflect")
    out = correlate1d(out, k, axis=2, mode="reflect")
    return Image(out, img.colorspace)


def crop(img: Image, region: Region) -> Image:
    if not region.fits(img.width, img.height):
        raise ValueError(
            f"region {region} exceeds image bounds {img.width}x{img.height}"
        )
    ys, xs = region.slices()
    return Image(img.planes[:, ys, xs].copy(), img.colorspace)


def paste(img: Image, patch: Image, x: int, y: int) -> Image:
    """Return a copy of ``img`` with ``patch`` written at (x, y)."""
    region = Region(x, y, patch.width, patch.height)
    if not region.fits(img.width, img.height):
        raise ValueError(f"paste footprint {region} exceeds image bounds {img.width}x{img.height}")
    out = img.planes.copy()
    ys, xs = region.slices()
    out[:, ys, xs] = patch.planes
    return Image(out, img.colorspace)
