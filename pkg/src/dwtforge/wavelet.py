"""Separable multi-level 2-D DWT with orthonormal Haar and Daubechies-4 filters.

Each analysis step filters rows, then columns, with periodised
(circular) convolution so the transform stays critically sampled and
orthonormal. Odd-length axes are first extended by one whole-sample
mirrored sample; the extra sample is cropped off again on synthesis, so
level-k sub-bands measure ceil(n / 2**k) along each axis.

Sub-band naming: the first letter is the filter applied along x (rows),
the second along y (columns). LH therefore holds horizontal edges.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imagecore import ColorSpace, Image, save_png


class WaveletKind(str, enum.Enum):
    HAAR = "haar"
    DB2 = "db2"


_S3 = math.sqrt(3.0)
_LOWPASS = {
    WaveletKind.HAAR: np.array([1.0, 1.0]) / math.sqrt(2.0),
    WaveletKind.DB2: np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4 * math.sqrt(2.0)),
}


def filters(kind: WaveletKind) -> tuple[np.ndarray, np.ndarray]:
    """Analysis (low, high) filters; high[k] = (-1)**k * low[L-1-k]."""
    lo = _LOWPASS[WaveletKind(kind)]
    hi = lo[::-1] * np.array([(-1.0) ** k for k in range(len(lo))])
    return lo, hi


@dataclass
class SubbandPyramid:
    """Level-``level`` decomposition of one plane.

    ``details`` holds one (LH, HL, HH) triple per level, coarsest first,
    so ``details[-1]`` is level 1.
    """

    level: int
    ll: np.ndarray
    details: list[tuple[np.ndarray, np.ndarray, np.ndarray]]
    original_size: tuple[int, int]  # (width, height)
    kind: WaveletKind = field(default=WaveletKind.HAAR)

    def detail(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Detail triple at level ``k`` (1 = finest)."""
        if not 1 <= k <= self.level:
            raise IndexError(f"level {k} outside 1..{self.level}")
        return self.details[self.level - k]

    def subbands(self):
        """Yield (name, level, array) for all 3l+1 sub-bands, LL first."""
        yield "LL", self.level, self.ll
        for k in range(self.level, 0, -1):
            lh, hl, hh = self.detail(k)
            yield f"LH{k}", k, lh
            yield f"HL{k}", k, hl
            yield f"HH{k}", k, hh

    @property
    def count(self) -> int:
        return 1 + 3 * len(self.details)

    def energy(self) -> float:
        return float(sum(np.sum(b * b) for _, _, b in self.subbands()))

    def map(self, fn) -> "SubbandPyramid":
        """New pyramid with ``fn(name, level, array)`` applied to every sub-band."""
        ll = fn("LL", self.level, self.ll)
        details = []
        for k in range(self.level, 0, -1):
            lh, hl, hh = self.detail(k)
            details.append((fn(f"LH{k}", k, lh), fn(f"HL{k}", k, hl), fn(f"HH{k}", k, hh)))
        return SubbandPyramid(self.level, ll, details, self.original_size, self.kind)


def subband_shape(width: int, height: int, k: int) -> tuple[int, int]:
    """(rows, cols) of a level-k sub-band for a width x height input."""
    return -(-height // 2**k), -(-width // 2**k)


def _even_extend(x: np.ndarray, axis: int) -> np.ndarray:
    n = x.shape[axis]
    if n % 2 == 0:
        return x
    # whole-sample mirror: ... c b a | b
    extra = np.take(x, [n - 2], axis=axis)
    return np.concatenate([x, extra], axis=axis)


def _analyze(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, axis: int):
    x = _even_extend(x, axis)
    a = np.zeros_like(np.take(x, np.arange(0, x.shape[axis], 2), axis=axis))
    d = np.zeros_like(a)
    for k in range(len(lo)):
        shifted = np.take(np.roll(x, -k, axis=axis), np.arange(0, x.shape[axis], 2), axis=axis)
        a += lo[k] * shifted
        d += hi[k] * shifted
    return a, d


def _synthesize(a: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray, axis: int, n: int):
    shape = list(a.shape)
    shape[axis] *= 2
    up_a = np.zeros(shape)
    up_d = np.zeros(shape)
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(0, None, 2)
    up_a[tuple(idx)] = a
    up_d[tuple(idx)] = d
    x = np.zeros(shape)
    for k in range(len(lo)):
        x += lo[k] * np.roll(up_a, k, axis=axis) + hi[k] * np.roll(up_d, k, axis=axis)
    return np.take(x, np.arange(n), axis=axis)


def _check_level(width: int, height: int, level: int) -> None:
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if width < 2**level or height < 2**level:
        raise ValueError(
            f"level {level} too deep for {width}x{height} plane (needs >= {2**level} px per axis)"
        )


def dwt2(plane, kind: WaveletKind = WaveletKind.HAAR, level: int = 1) -> SubbandPyramid:
    x = np.asarray(plane, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("dwt2 expects a 2-D plane")
    kind = WaveletKind(kind)
    height, width = x.shape
    _check_level(width, height, level)
    lo, hi = filters(kind)
    details = []
    for _ in range(level):
        l_x, h_x = _analyze(x, lo, hi, axis=1)
        ll, lh = _analyze(l_x, lo, hi, axis=0)
        hl, hh = _analyze(h_x, lo, hi, axis=0)
        details.append((lh, hl, hh))
        x = ll
    details.reverse()
    return SubbandPyramid(level, x, details, (width, height), kind)


def idwt2(pyr: SubbandPyramid, kind: WaveletKind | None = None) -> np.ndarray:
    kind = WaveletKind(kind if kind is not None else pyr.kind)
    width, height = pyr.original_size
    _check_level(width, height, pyr.level)
    if len(pyr.details) != pyr.level:
        raise ValueError(f"pyramid has {len(pyr.details)} detail levels, expected {pyr.level}")
    expect = subband_shape(width, height, pyr.level)
    if pyr.ll.shape != expect:
        raise ValueError(f"LL has shape {pyr.ll.shape}, expected {expect}")
    lo, hi = filters(kind)
    x = np.asarray(pyr.ll, dtype=np.float64)
    for k in range(pyr.level, 0, -1):
        expect = subband_shape(width, height, k)
        lh, hl, hh = pyr.detail(k)
        for name, band in (("LH", lh), ("HL", hl), ("HH", hh)):
            if band.shape != expect:
                raise ValueError(f"{name}{k} has shape {band.shape}, expected {expect}")
        rows, cols = subband_shape(width, height, k - 1)
        l_x = _synthesize(x, lh, lo, hi, axis=0, n=rows)
        h_x = _synthesize(hl, hh, lo, hi, axis=0, n=rows)
        x = _synthesize(l_x, h_x, lo, hi, axis=1, n=cols)
    return x


def dwt_image(img: Image, kind: WaveletKind = WaveletKind.HAAR, level: int = 1) -> list[SubbandPyramid]:
    """One pyramid per channel, in Y, Cb, Cr order."""
    if img.colorspace is not ColorSpace.YCBCR:
        raise ValueError(f"dwt_image expects a YCbCr image, got {img.colorspace.value}")
    return [dwt2(p, kind, level) for p in img.planes]


def idwt_image(pyramids: list[SubbandPyramid], kind: WaveletKind | None = None) -> Image:
    return Image(np.stack([idwt2(p, kind) for p in pyramids]), ColorSpace.YCBCR)


def dump_subbands(pyr: SubbandPyramid, prefix) -> list[Path]:
    """Write each sub-band, min-max stretched to [0, 255], as ``<prefix>_<name>.png``."""
    prefix = Path(prefix)
    written = []
    for name, _, band in pyr.subbands():
        lo, hi = float(band.min()), float(band.max())
        scaled = (band - lo) * (255.0 / (hi - lo)) if hi > lo else np.zeros_like(band)
        path = prefix.with_name(f"{prefix.name}_{name}.png")
        save_png(Image(scaled[None], ColorSpace.GRAY), path)
        written.append(path)
    return written
