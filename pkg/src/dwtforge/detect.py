"""Block-matching copy-move detectors.

Two block descriptors are provided:

* ``tchebichef``: each block is split into four quadrants, low-order
  orthonormal Tchebichef moments (p + q <= 2) of every quadrant form a
  4 x 6 matrix, and its singular values are the feature.
* ``dctsign``: signs of the first 16 zig-zag AC coefficients of the
  block's orthonormal DCT-II.

Features are sorted lexicographically, compared against a short window
of sorted neighbours, and matched pairs vote for their shift vector.
Blocks behind well-supported shifts form the detection map, which is
cleaned with a morphological opening and a small-component filter.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .imagecore import Image, to_gray


class Feature(str, enum.Enum):
    TCHEBICHEF_SVD = "tchebichef"
    DCT_SIGN = "dctsign"


DEFAULT_TOL = {Feature.TCHEBICHEF_SVD: 0.005, Feature.DCT_SIGN: 0.95}
N_SIGNS = 16
# (p, q) pairs with p + q <= 2; p is the row (y) order.
MOMENT_ORDERS = ((0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0))


@dataclass(frozen=True)
class DetectorParams:
    feature: Feature = Feature.TCHEBICHEF_SVD
    block_size: int = 8
    stride: int = 1
    sort_window: int = 10
    feature_tol: float | None = None
    min_shift_distance: float = 16.0
    shift_vote_threshold: int = 150
    low_variance_floor: float = 1.0
    morph_open_radius: int = 1
    min_component_area: int = 64

    def __post_init__(self):
        object.__setattr__(self, "feature", Feature(self.feature))
        if self.feature_tol is None:
            object.__setattr__(self, "feature_tol", DEFAULT_TOL[self.feature])
        if self.block_size < 4:
            raise ValueError(f"block_size must be >= 4, got {self.block_size}")
        if self.feature is Feature.TCHEBICHEF_SVD and (self.block_size % 2 or self.block_size < 6):
            raise ValueError("tchebichef features need an even block_size >= 6")
        if self.feature is Feature.DCT_SIGN and self.block_size**2 - 1 < N_SIGNS:
            raise ValueError(f"dctsign needs at least {N_SIGNS} AC coefficients per block")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.sort_window < 1:
            raise ValueError(f"sort_window must be >= 1, got {self.sort_window}")
        for name in ("feature_tol", "min_shift_distance", "shift_vote_threshold",
                     "low_variance_floor", "morph_open_radius", "min_component_area"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feature"] = self.feature.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown detector parameter(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class DetectionMap:
    detected: np.ndarray  # bool, (height, width)
    block_count: int = 0
    skipped_blocks: int = 0
    matched_pairs: int = 0
    shifts: list[tuple[int, int, int]] = field(default_factory=list)  # (dx, dy, votes)

    @property
    def height(self) -> int:
        return self.detected.shape[0]

    @property
    def width(self) -> int:
        return self.detected.shape[1]

    def report(self, params: DetectorParams) -> dict:
        return {
            "params": params.to_dict(),
            "width": self.width,
            "height": self.height,
            "block_count": self.block_count,
            "skipped_block_count": self.skipped_blocks,
            "matched_pair_count": self.matched_pairs,
            "detected_pixels": int(self.detected.sum()),
            "shift_vectors": [{"dx": dx, "dy": dy, "count": c} for dx, dy, c in self.shifts],
        }


def tchebichef_polynomials(n: int, max_order: int) -> np.ndarray:
    """Orthonormal discrete Tchebichef polynomials, shape (max_order + 1, n).

    Uses the three-term recurrence in x-independent coefficients, which
    stays stable for the small orders used here.
    """
    if max_order < 0 or max_order >= n:
        raise ValueError(f"need 0 <= max_order < n, got max_order={max_order}, n={n}")
    x = np.arange(n, dtype=np.float64)
    t = np.zeros((max_order + 1, n))
    t[0] = 1.0 / math.sqrt(n)
    if max_order >= 1:
        t[1] = (2 * x + 1 - n) * math.sqrt(3.0 / (n * (n * n - 1.0)))
    for p in range(2, max_order + 1):
        c = math.sqrt((4.0 * p * p - 1) / (n * n - p * p))
        a1 = 2.0 / p * c
        a2 = (1.0 - n) / p * c
        a3 = (1.0 - p) / p * math.sqrt((2.0 * p + 1) / (2.0 * p - 3)) * math.sqrt(
            (n * n - (p - 1.0) ** 2) / (n * n - p * p)
        )
        t[p] = (a1 * x + a2) * t[p - 1] + a3 * t[p - 2]
    return t


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis, row u holds frequency u."""
    k = np.arange(n)
    c = np.cos(np.pi * (2 * k[None, :] + 1) * k[:, None] / (2 * n))
    c[0] *= math.sqrt(1.0 / n)
    c[1:] *= math.sqrt(2.0 / n)
    return c


def zigzag(n: int) -> list[tuple[int, int]]:
    """JPEG zig-zag scan of an n x n grid as (row, col) pairs."""
    order = []
    for s in range(2 * n - 1):
        cells = [(i, s - i) for i in range(n) if 0 <= s - i < n]
        order.extend(cells if s % 2 else cells[::-1])
    return order


def _separable_maps(gray: np.ndarray, row_basis: np.ndarray, col_basis: np.ndarray, pairs) -> np.ndarray:
    """For every n x n window, sum_ij row_basis[p, i] col_basis[q, j] f[y+i, x+j].

    Returns shape (len(pairs), H - n + 1, W - n + 1). Plain slice
    arithmetic keeps every output sample independent of the input extent.
    """
    n = row_basis.shape[1]
    h, w = gray.shape
    oh, ow = h - n + 1, w - n + 1
    qs = sorted({q for _, q in pairs})
    horiz = {}
    for q in qs:
        acc = np.zeros((h, ow))
        for j in range(n):
            acc += col_basis[q, j] * gray[:, j:j + ow]
        horiz[q] = acc
    out = np.empty((len(pairs), oh, ow))
    for m, (p, q) in enumerate(pairs):
        acc = np.zeros((oh, ow))
        for i in range(n):
            acc += row_basis[p, i] * horiz[q][i:i + oh]
        out[m] = acc
    return out


def _tchebichef_block_features(gray: np.ndarray, block: int, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    half = block // 2
    t = tchebichef_polynomials(half, 2)
    maps = _separable_maps(gray, t, t, MOMENT_ORDERS)
    quads = []
    for qy, qx in ((0, 0), (0, half), (half, 0), (half, half)):
        quads.append(maps[:, ys + qy, xs + qx].T)  # (blocks, 6)
    mats = np.stack(quads, axis=1)  # (blocks, 4, 6)
    return np.linalg.svd(mats, compute_uv=False)


def _dct_sign_block_features(gray: np.ndarray, block: int, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    c = dct_matrix(block)
    pairs = zigzag(block)[1:N_SIGNS + 1]
    coefs = _separable_maps(gray, c, c, pairs)[:, ys, xs].T
    # exact zero, and float noise around it, counts as positive; fixed
    # 8-bit scale so the cut-off never depends on the band being processed
    return np.where(coefs < -1e-12 * 255.0 * block, -1.0, 1.0)


_EXTRACTORS = {
    Feature.TCHEBICHEF_SVD: _tchebichef_block_features,
    Feature.DCT_SIGN: _dct_sign_block_features,
}


def _single_block(block, feature: Feature) -> np.ndarray:
    b = np.asarray(block, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"expected a square block, got shape {b.shape}")
    DetectorParams(feature=feature, block_size=b.shape[0])
    zero = np.zeros(1, dtype=np.intp)
    return _EXTRACTORS[feature](b, b.shape[0], zero, zero)[0]


def feature_tchebichef_svd(block) -> np.ndarray:
    """Four singular values, descending, of the quadrant-moment matrix."""
    return _single_block(block, Feature.TCHEBICHEF_SVD)


def feature_dct_sign(block) -> np.ndarray:
    """Signs (+1/-1) of the first 16 zig-zag AC DCT coefficients."""
    return _single_block(block, Feature.DCT_SIGN)


def _block_stats(gray: np.ndarray, block: int) -> np.ndarray:
    """Population standard deviation of every block x block window."""
    h, w = gray.shape
    oh, ow = h - block + 1, w - block + 1
    g = gray - gray.mean()
    s1 = np.zeros((h, ow))
    s2 = np.zeros((h, ow))
    for j in range(block):
        s1 += g[:, j:j + ow]
        s2 += g[:, j:j + ow] ** 2
    t1 = np.zeros((oh, ow))
    t2 = np.zeros((oh, ow))
    for i in range(block):
        t1 += s1[i:i + oh]
        t2 += s2[i:i + oh]
    n = block * block
    var = np.maximum(t2 / n - (t1 / n) ** 2, 0.0)
    return np.sqrt(var)


def extract_features(gray: np.ndarray, params: DetectorParams, workers: int = 1):
    """Return (origins (n, 2) as (y, x), features (n, d), total block count)."""
    b, s = params.block_size, params.stride
    h, w = gray.shape
    ys_all = np.arange(0, h - b + 1, s)
    xs_all = np.arange(0, w - b + 1, s)
    std = _block_stats(gray, b)[np.ix_(ys_all, xs_all)]
    yy, xx = np.meshgrid(ys_all, xs_all, indexing="ij")
    keep = std >= params.low_variance_floor
    ys, xs = yy[keep], xx[keep]
    total = yy.size
    extractor = _EXTRACTORS[params.feature]
    if len(ys) == 0:
        return np.zeros((0, 2), dtype=np.intp), np.zeros((0, 4)), total

    # Horizontal bands of block rows; each band sees only the pixel rows it needs.
    n_bands = max(1, min(workers, len(ys_all)))
    edges = np.linspace(0, len(ys_all), n_bands + 1).astype(int)
    jobs = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == hi:
            continue
        y0, y1 = ys_all[lo], ys_all[hi - 1]
        sel = (ys >= y0) & (ys <= y1)
        jobs.append((y0, y1, sel))

    def run(job):
        y0, y1, sel = job
        sub = gray[y0:y1 + b]
        return extractor(sub, b, ys[sel] - y0, xs[sel])

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    # bands are contiguous runs of the row-major origin list
    feats = np.concatenate(parts, axis=0)
    return np.stack([ys, xs], axis=1), feats, total


def sort_features(origins: np.ndarray, feats: np.ndarray) -> np.ndarray:
    """Lexicographic order on 4-decimal rounded features, ties broken by (y, x)."""
    rounded = np.round(feats, 4)
    keys = [origins[:, 1], origins[:, 0]] + [rounded[:, k] for k in range(feats.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def match_pairs(origins: np.ndarray, feats: np.ndarray, params: DetectorParams):
    """Matched pairs as arrays (a, b, dx, dy), shift normalised to dx > 0 or dx == 0, dy > 0."""
    order = sort_features(origins, feats)
    a_all, b_all = [], []
    norms = np.linalg.norm(feats, axis=1)
    for k in range(1, params.sort_window + 1):
        if k >= len(order):
            break
        i, j = order[:-k], order[k:]
        if params.feature is Feature.TCHEBICHEF_SVD:
            dist = np.linalg.norm(feats[i] - feats[j], axis=1)
            ok = dist <= params.feature_tol * np.maximum(norms[i], norms[j])
        else:
            corr = np.einsum("ij,ij->i", feats[i], feats[j]) / feats.shape[1]
            ok = corr >= params.feature_tol
        d = origins[j] - origins[i]
        far = np.hypot(d[:, 0], d[:, 1]) >= max(params.min_shift_distance, 1e-9)
        ok &= far
        a_all.append(i[ok])
        b_all.append(j[ok])
    a = np.concatenate(a_all) if a_all else np.zeros(0, dtype=np.intp)
    b = np.concatenate(b_all) if b_all else np.zeros(0, dtype=np.intp)
    dy = origins[b, 0] - origins[a, 0]
    dx = origins[b, 1] - origins[a, 1]
    flip = (dx < 0) | ((dx == 0) & (dy < 0))
    a, b = np.where(flip, b, a), np.where(flip, a, b)
    dx, dy = np.where(flip, -dx, dx), np.where(flip, -dy, dy)
    return a, b, dx, dy


def morphological_open(mask, radius: int) -> np.ndarray:
    """Erosion then dilation with a (2r+1) x (2r+1) square."""
    m = np.asarray(mask, dtype=bool)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if radius == 0:
        return m.copy()
    st = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return ndimage.binary_dilation(ndimage.binary_erosion(m, st), st)


def remove_small_components(mask: np.ndarray, min_area: int) -> np.ndarray:
    if min_area <= 1:
        return mask.copy()
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return mask.copy()
    areas = np.bincount(labels.ravel())
    keep = areas >= min_area
    keep[0] = False
    return keep[labels]


def detect(img: Image | np.ndarray, params: DetectorParams | None = None, workers: int = 1) -> DetectionMap:
    """Run the block-matching detector on the luma of ``img``."""
    params = params or DetectorParams()
    gray = to_gray(img) if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    h, w = gray.shape
    b = params.block_size
    if h < b or w < b:
        raise ValueError(f"image {w}x{h} is smaller than the {b}x{b} block")

    origins, feats, total = extract_features(gray, params, workers)
    detected = np.zeros((h, w), dtype=bool)
    result = DetectionMap(detected, block_count=total, skipped_blocks=total - len(origins))
    if len(origins) < 2:
        return result

    a, bb, dx, dy = match_pairs(origins, feats, params)
    result.matched_pairs = int(len(a))
    if len(a) == 0:
        return result
    shifts, inverse, counts = np.unique(np.stack([dx, dy], axis=1), axis=0,
                                        return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    winners = counts >= params.shift_vote_threshold
    ranked = sorted(
        ((int(shifts[k, 0]), int(shifts[k, 1]), int(counts[k])) for k in np.flatnonzero(winners)),
        key=lambda s: (-s[2], s[0], s[1]),
    )
    result.shifts = ranked
    chosen = winners[inverse]
    # Paint every block of the winning pairs via a difference image of block corners.
    corners = np.zeros((h + 1, w + 1), dtype=np.int64)
    for idx in (a[chosen], bb[chosen]):
        ys, xs = origins[idx, 0], origins[idx, 1]
        np.add.at(corners, (ys, xs), 1)
        np.add.at(corners, (ys + b, xs), -1)
        np.add.at(corners, (ys, xs + b), -1)
        np.add.at(corners, (ys + b, xs + b), 1)
    cover = corners.cumsum(axis=0).cumsum(axis=1)[:h, :w] > 0
    cleaned = morphological_open(cover, params.morph_open_radius)
    result.detected = remove_small_components(cleaned, params.min_component_area)
    return result
