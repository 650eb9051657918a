"""Copy-move forgery synthesis in the wavelet domain, plus a pixel-domain baseline."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import (
    ColorSpace,
    Image,
    Mask,
    Region,
    crop,
    rgb_to_ycbcr,
    save_mask,
    save_png,
    smooth,
    ycbcr_to_rgb,
)
from .wavelet import WaveletKind, dwt_image, idwt_image


class ForgeryError(ValueError):
    pass


class Blend(str, enum.Enum):
    CUTOUT = "cutout"
    ALPHA = "alpha"


@dataclass(frozen=True)
class ForgerySpec:
    patch_region: Region
    paste_offset: tuple[int, int]
    level: int = 1
    kind: WaveletKind = WaveletKind.HAAR
    blend: Blend = Blend.CUTOUT
    feather: float = 0.0
    smooth_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveletKind(self.kind))
        object.__setattr__(self, "blend", Blend(self.blend))
        object.__setattr__(self, "paste_offset", tuple(int(v) for v in self.paste_offset))
        if self.level < 1:
            raise ForgeryError(f"level must be >= 1, got {self.level}")
        if self.feather < 0:
            raise ForgeryError(f"feather must be non-negative, got {self.feather}")
        if self.smooth_sigma < 0:
            raise ForgeryError(f"smooth_sigma must be non-negative, got {self.smooth_sigma}")
        if self.blend is Blend.ALPHA and self.feather <= 0:
            raise ForgeryError("alpha blending needs feather > 0")

    @property
    def paste_region(self) -> Region:
        px, py = self.paste_offset
        return Region(px, py, self.patch_region.w, self.patch_region.h)

    @property
    def effective_feather(self) -> float:
        return self.feather if self.blend is Blend.ALPHA else 0.0

    def validate(self, width: int, height: int) -> None:
        px, py = self.paste_offset
        if px < 0 or py < 0:
            raise ForgeryError(f"paste offset ({px}, {py}) is out of bounds")
        if not self.patch_region.fits(width, height):
            raise ForgeryError(
                f"patch region {self.patch_region} exceeds host bounds {width}x{height}"
            )
        if not self.paste_region.fits(width, height):
            raise ForgeryError(
                f"paste footprint {self.paste_region} exceeds host bounds {width}x{height}"
            )

    def to_dict(self) -> dict:
        r = self.patch_region
        return {
            "patch_x": r.x,
            "patch_y": r.y,
            "patch_w": r.w,
            "patch_h": r.h,
            "paste_x": self.paste_offset[0],
            "paste_y": self.paste_offset[1],
            "level": self.level,
            "wavelet": self.kind.value,
            "blend": self.blend.value,
            "feather": float(self.feather),
            "smooth_sigma": float(self.smooth_sigma),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForgerySpec":
        try:
            return cls(
                patch_region=Region(int(d["patch_x"]), int(d["patch_y"]), int(d["patch_w"]), int(d["patch_h"])),
                paste_offset=(int(d["paste_x"]), int(d["paste_y"])),
                level=int(d.get("level", 1)),
                kind=WaveletKind(d.get("wavelet", "haar")),
                blend=Blend(d.get("blend", "cutout")),
                feather=float(d.get("feather", 0.0)),
                smooth_sigma=float(d.get("smooth_sigma", 0.0)),
            )
        except KeyError as exc:
            raise ForgeryError(f"forgery spec is missing field {exc}") from exc


@dataclass(frozen=True)
class ForgeryOutput:
    forged: Image
    truth_mask: Mask
    spec: ForgerySpec

    @property
    def source_mask(self) -> Mask:
        """Footprint of the region the patch was copied from."""
        return Mask.from_region(self.truth_mask.width, self.truth_mask.height, self.spec.patch_region)

    def copy_move_mask(self) -> Mask:
        """Union of source and pasted footprints."""
        return Mask(np.maximum(self.truth_mask.alpha, self.source_mask.alpha))

    def save(self, image_path, mask_path=None, sidecar_path=None) -> None:
        save_png(self.forged, image_path)
        if mask_path is not None:
            save_mask(self.truth_mask, mask_path)
        if sidecar_path is not None:
            write_sidecar(self.spec, sidecar_path)


def write_sidecar(spec: ForgerySpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")


def map_region_to_subband(region_or_offset, k: int):
    """Map full-resolution coordinates to level-k sub-band coordinates.

    Offsets are floor-divided by 2**k; a Region additionally gets the
    ceil-divided extent its content occupies at level k.
    """
    if k < 1:
        raise ValueError(f"sub-band level must be >= 1, got {k}")
    s = 2**k
    if isinstance(region_or_offset, Region):
        r = region_or_offset
        return Region(r.x // s, r.y // s, -(-r.w // s), -(-r.h // s))
    x, y = region_or_offset
    return x // s, y // s


def _ramp(n: int, feather: float) -> np.ndarray:
    # distance from each pixel centre to the nearest edge of [0, n]
    centres = np.arange(n) + 0.5
    d = np.minimum(centres, n - centres)
    return np.minimum(1.0, d / feather)


def make_alpha_mask(extent: tuple[int, int], feather: float) -> Mask:
    """Separable linear feather for a (width, height) patch."""
    w, h = extent
    if feather < 0:
        raise ValueError(f"feather must be non-negative, got {feather}")
    if w <= 0 or h <= 0:
        raise ValueError(f"mask extent must be positive, got {w}x{h}")
    if feather == 0:
        return Mask(np.ones((h, w)))
    return Mask(np.outer(_ramp(h, feather), _ramp(w, feather)))


def downsample_mask(alpha: np.ndarray, k: int) -> np.ndarray:
    """Average over 2**k x 2**k cells; partial edge cells average what they cover."""
    s = 2**k
    h, w = alpha.shape
    rows, cols = -(-h // s), -(-w // s)
    padded = np.zeros((rows * s, cols * s))
    weight = np.zeros_like(padded)
    padded[:h, :w] = alpha
    weight[:h, :w] = 1.0
    sums = padded.reshape(rows, s, cols, s).sum(axis=(1, 3))
    counts = weight.reshape(rows, s, cols, s).sum(axis=(1, 3))
    return sums / counts


def _prepare(host: Image, spec: ForgerySpec) -> tuple[Image, Image]:
    if host.colorspace is not ColorSpace.RGB:
        raise ForgeryError(f"host must be RGB, got {host.colorspace.value}")
    spec.validate(host.width, host.height)
    source = smooth(host, spec.smooth_sigma)
    return source, crop(source, spec.patch_region)


def forge_dwt(host: Image, spec: ForgerySpec) -> ForgeryOutput:
    """Paste the patch sub-band by sub-band, then invert the transform."""
    source, patch = _prepare(host, spec)
    side = 2**spec.level
    if patch.width < side or patch.height < side:
        raise ForgeryError(
            f"level {spec.level} too deep for a {patch.width}x{patch.height} patch "
            f"(needs >= {side} px per axis)"
        )
    host_pyr = dwt_image(rgb_to_ycbcr(source), spec.kind, spec.level)
    patch_pyr = dwt_image(rgb_to_ycbcr(patch), spec.kind, spec.level)
    alpha = make_alpha_mask((patch.width, patch.height), spec.effective_feather).alpha
    sub_alpha = {k: downsample_mask(alpha, k) for k in range(1, spec.level + 1)}

    blended = []
    for hp, pp in zip(host_pyr, patch_pyr):
        patch_bands = {name: band for name, _, band in pp.subbands()}

        def paste_band(name, k, band, patch_bands=patch_bands):
            ox, oy = map_region_to_subband(spec.paste_offset, k)
            src = patch_bands[name]
            a = sub_alpha[k]
            out = band.copy()
            h, w = src.shape
            window = out[oy:oy + h, ox:ox + w]
            out[oy:oy + h, ox:ox + w] = a * src + (1.0 - a) * window
            return out

        blended.append(hp.map(paste_band))

    forged = ycbcr_to_rgb(idwt_image(blended, spec.kind))
    truth = Mask.from_region(host.width, host.height, spec.paste_region)
    return ForgeryOutput(forged, truth, spec)


def forge_spatial(host: Image, spec: ForgerySpec) -> ForgeryOutput:
    """Plain pixel-domain copy-move with the same blending options."""
    source, patch = _prepare(host, spec)
    alpha = make_alpha_mask((patch.width, patch.height), spec.effective_feather).alpha
    out = source.planes.copy()
    ys, xs = spec.paste_region.slices()
    out[:, ys, xs] = alpha * patch.planes + (1.0 - alpha) * out[:, ys, xs]
    truth = Mask.from_region(host.width, host.height, spec.paste_region)
    return ForgeryOutput(Image(out, ColorSpace.RGB), truth, spec)


def _overlaps(a: Region, b: Region) -> bool:
    return a.x < b.x + b.w and b.x < a.x + a.w and a.y < b.y + b.h and b.y < a.y + a.h


def random_spec(
    width: int,
    height: int,
    rng: np.random.Generator,
    *,
    min_frac: float = 0.10,
    max_frac: float = 0.25,
    unaligned: bool = False,
    max_tries: int = 10_000,
    **fixed,
) -> ForgerySpec:
    """Draw a patch of 10-25% of the short side and a non-overlapping paste spot.

    ``unaligned`` forces both paste coordinates off the 2**level grid.
    Remaining keyword arguments (level, kind, blend, ...) are passed
    through to :class:`ForgerySpec`.
    """
    short = min(width, height)
    lo = max(1, math.ceil(min_frac * short))
    hi = max(lo, math.floor(max_frac * short))
    level = int(fixed.get("level", 1))
    side = 2**level
    for _ in range(max_tries):
        pw = int(rng.integers(lo, hi + 1))
        ph = int(rng.integers(lo, hi + 1))
        src = Region(int(rng.integers(0, width - pw + 1)), int(rng.integers(0, height - ph + 1)), pw, ph)
        px = int(rng.integers(0, width - pw + 1))
        py = int(rng.integers(0, height - ph + 1))
        if unaligned and (px % side == 0 or py % side == 0):
            continue
        dst = Region(px, py, pw, ph)
        if not _overlaps(src, dst):
            return ForgerySpec(patch_region=src, paste_offset=(px, py), **fixed)
    raise ForgeryError(f"could not place a non-overlapping patch in a {width}x{height} image")
