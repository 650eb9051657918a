import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwtforge.detect import (
    MOMENT_ORDERS,
    DetectorParams,
    Feature,
    detect,
    extract_features,
    feature_dct_sign,
    feature_tchebichef_svd,
    match_pairs,
    morphological_open,
    remove_small_components,
    tchebichef_polynomials,
    zigzag,
)
from dwtforge.forge import ForgerySpec, forge_spatial
from dwtforge.imagecore import ColorSpace, Image, Region, quantize, to_gray


def test_t0_is_constant():
    t = tchebichef_polynomials(8, 3)
    assert np.allclose(t[0], 1 / math.sqrt(8), atol=1e-15)


def test_gram_matrix_is_identity():
    t = tchebichef_polynomials(8, 3)
    assert np.abs(t @ t.T - np.eye(4)).max() < 1e-10


def test_matches_gram_schmidt_on_monomials():
    n, order = 9, 4
    x = np.arange(n, dtype=float)
    basis = []
    for p in range(order + 1):
        v = x**p
        for b in basis:
            v = v - np.dot(v, b) * b
        basis.append(v / np.linalg.norm(v))
    t = tchebichef_polynomials(n, order)
    assert np.abs(t - np.array(basis)).max() < 1e-10


def test_t1_is_odd():
    t = tchebichef_polynomials(8, 1)
    assert np.allclose(t[1], -t[1][::-1], atol=1e-15)


def test_polynomial_order_precondition():
    with pytest.raises(ValueError):
        tchebichef_polynomials(4, 4)


def _naive_tchebichef_feature(block):
    half = block.shape[0] // 2
    t = tchebichef_polynomials(half, 2)
    rows = []
    for qy, qx in ((0, 0), (0, half), (half, 0), (half, half)):
        q = block[qy:qy + half, qx:qx + half]
        row = []
        for p, r in MOMENT_ORDERS:
            s = 0.0
            for y in range(half):
                for x in range(half):
                    s += t[p, y] * t[r, x] * q[y, x]
            row.append(s)
        rows.append(row)
    return np.linalg.svd(np.array(rows), compute_uv=False)


def test_constant_block_singular_values():
    c = 93.0
    got = feature_tchebichef_svd(np.full((8, 8), c))
    oracle = _naive_tchebichef_feature(np.full((8, 8), c))
    assert np.abs(oracle - [8 * c, 0, 0, 0]).max() < 1e-9
    assert np.abs(got - oracle).max() < 1e-9


def test_tchebichef_feature_matches_naive(rng):
    for _ in range(5):
        block = rng.uniform(0, 255, (8, 8))
        assert np.abs(feature_tchebichef_svd(block) - _naive_tchebichef_feature(block)).max() < 1e-9


def test_tchebichef_feature_shape_and_order(rng):
    v = feature_tchebichef_svd(rng.uniform(0, 255, (8, 8)))
    assert v.shape == (4,)
    assert np.all(v >= 0)
    assert np.all(np.diff(v) <= 0)


def test_feature_is_local(rng):
    img = rng.uniform(0, 255, (40, 40))
    img[25:33, 20:28] = img[3:11, 5:13]
    for feature in Feature:
        p = DetectorParams(feature=feature, low_variance_floor=0)
        origins, feats, _ = extract_features(img, p)
        lookup = {tuple(o): f for o, f in zip(origins, feats)}
        assert np.array_equal(lookup[(3, 5)], lookup[(25, 20)])


def test_vectorised_features_equal_single_block(rng):
    img = rng.uniform(0, 255, (20, 23))
    for feature, single in ((Feature.TCHEBICHEF_SVD, feature_tchebichef_svd),
                            (Feature.DCT_SIGN, feature_dct_sign)):
        origins, feats, total = extract_features(img, DetectorParams(feature=feature, low_variance_floor=0))
        assert total == 13 * 16
        for (y, x), f in zip(origins[::17], feats[::17]):
            assert np.abs(single(img[y:y + 8, x:x + 8]) - f).max() < 1e-9


def test_wrong_block_size():
    with pytest.raises(ValueError):
        feature_tchebichef_svd(np.zeros((5, 5)))
    with pytest.raises(ValueError):
        feature_dct_sign(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        feature_dct_sign(np.zeros((8, 6)))


def test_zigzag_prefix():
    assert zigzag(8)[:10] == [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (3, 0)]
    assert len(set(zigzag(8))) == 64


def _naive_dct2(block):
    n = block.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            cu = math.sqrt(1 / n) if u == 0 else math.sqrt(2 / n)
            cv = math.sqrt(1 / n) if v == 0 else math.sqrt(2 / n)
            s = 0.0
            for y in range(n):
                for x in range(n):
                    s += block[y, x] * math.cos(math.pi * (2 * y + 1) * u / (2 * n)) * math.cos(
                        math.pi * (2 * x + 1) * v / (2 * n))
            out[u, v] = cu * cv * s
    return out


def _naive_signs(block):
    c = _naive_dct2(block)
    # analytically zero coefficients count as positive
    return np.array([1.0 if c[u, v] >= -1e-9 else -1.0 for u, v in zigzag(block.shape[0])[1:17]])


def test_dct_sign_constant_block():
    assert np.all(feature_dct_sign(np.full((8, 8), 77.0)) == 1.0)


def test_dct_sign_negation(rng):
    block = rng.uniform(0, 255, (8, 8))
    assert np.array_equal(feature_dct_sign(255 - block), -feature_dct_sign(block))


def test_dct_sign_horizontal_ramp():
    block = np.tile(np.arange(8, dtype=float) * 10, (8, 1))
    got = feature_dct_sign(block)
    assert np.array_equal(got, _naive_signs(block))
    assert got[0] == -1.0  # (0, 1) coefficient of a rising ramp is negative


def test_dct_sign_random_blocks(rng):
    for _ in range(5):
        block = rng.uniform(0, 255, (8, 8))
        assert np.array_equal(feature_dct_sign(block), _naive_signs(block))


def _naive_erode(m, r):
    h, w = m.shape
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            ok = True
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if not (0 <= yy < h and 0 <= xx < w) or not m[yy, xx]:
                        ok = False
            out[y, x] = ok
    return out


def _naive_dilate(m, r):
    h, w = m.shape
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(
                m[y + dy, x + dx]
                for dy in range(-r, r + 1)
                for dx in range(-r, r + 1)
                if 0 <= y + dy < h and 0 <= x + dx < w
            )
    return out


def test_open_identity_and_speck(rng):
    m = rng.random((12, 12)) > 0.5
    assert np.array_equal(morphological_open(m, 0), m)
    speck = np.zeros((9, 9), bool)
    speck[4, 4] = True
    assert not morphological_open(speck, 1).any()


def test_open_square_matches_naive():
    m = np.zeros((16, 16), bool)
    m[3:13, 4:14] = True
    got = morphological_open(m, 1)
    assert np.array_equal(got, _naive_dilate(_naive_erode(m, 1), 1))
    assert np.array_equal(got, m)


def test_open_random_matches_naive(rng):
    m = rng.random((14, 15)) > 0.3
    assert np.array_equal(morphological_open(m, 1), _naive_dilate(_naive_erode(m, 1), 1))


def test_remove_small_components():
    m = np.zeros((10, 10), bool)
    m[0:2, 0:2] = True
    m[5:10, 5:10] = True
    out = remove_small_components(m, 5)
    assert not out[0:2, 0:2].any()
    assert out[5:10, 5:10].all()


def test_constant_image_detects_nothing():
    img = Image(np.full((3, 64, 64), 120.0), ColorSpace.RGB)
    d = detect(img)
    assert not d.detected.any()
    assert d.skipped_blocks == d.block_count == 57 * 57


def test_image_smaller_than_block():
    with pytest.raises(ValueError):
        detect(np.zeros((7, 30)))


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(block_size=3)
    with pytest.raises(ValueError):
        DetectorParams(stride=0)
    with pytest.raises(ValueError):
        DetectorParams(shift_vote_threshold=-1)
    with pytest.raises(ValueError):
        DetectorParams.from_dict({"feature": "tchebichef", "bogus": 1})
    assert DetectorParams(feature="dctsign").feature_tol == 0.95


def _noise_with_clone(rng, size=96, clone=32, src=(5, 7), dst=(50, 60)):
    img = rng.uniform(0, 255, (size, size))
    sy, sx = src
    dy, dx = dst
    img[dy:dy + clone, dx:dx + clone] = img[sy:sy + clone, sx:sx + clone]
    return img


@pytest.mark.parametrize("feature", list(Feature))
def test_shift_vote_soundness(feature, rng):
    img = _noise_with_clone(rng)
    d = detect(img, DetectorParams(feature=feature))
    votes = {(dx, dy): c for dx, dy, c in d.shifts}
    assert votes[(53, 45)] >= (32 - 8 + 1) ** 2
    assert votes[(53, 45)] > DetectorParams().shift_vote_threshold


def test_pairs_respect_min_distance(rng):
    img = _noise_with_clone(rng)
    params = DetectorParams(min_shift_distance=30)
    origins, feats, _ = extract_features(img, params)
    a, b, dx, dy = match_pairs(origins, feats, params)
    assert len(a) > 0
    assert np.all(a != b)
    assert np.all(np.hypot(dx, dy) >= 30)
    assert np.all((dx > 0) | ((dx == 0) & (dy > 0)))


def test_close_copy_is_gated(rng):
    img = rng.uniform(0, 255, (64, 64))
    img[20:52, 30:62] = img[20:52, 20:52]  # shift of 10 px
    assert not detect(img).detected.any()


def test_detects_exact_copy_on_natural_image(photos):
    host = Image.from_hwc(photos["chelsea"])
    spec = ForgerySpec(Region(100, 120, 64, 64), (250, 210))
    out = forge_spatial(host, spec)
    d = detect(Image.from_hwc(quantize(out.forged.to_hwc())))
    for mask in (out.truth_mask, out.source_mask):
        m = mask.binary()
        assert (d.detected & m).sum() / m.sum() >= 0.8


def test_worker_count_does_not_change_result(photos):
    host = Image.from_hwc(photos["coffee"])
    out = forge_spatial(host, ForgerySpec(Region(300, 40, 64, 64), (60, 300)))
    img = Image.from_hwc(quantize(out.forged.to_hwc()))
    for feature in Feature:
        p = DetectorParams(feature=feature)
        one, four = detect(img, p, workers=1), detect(img, p, workers=4)
        assert np.array_equal(one.detected, four.detected)
        assert one.shifts == four.shifts and one.matched_pairs == four.matched_pairs


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 400), st.integers(1, 400))
def test_threshold_monotonicity(seed, t1, t2):
    lo, hi = sorted((t1, t2))
    r = np.random.default_rng(seed)
    img = _noise_with_clone(r, size=72, clone=int(r.integers(12, 30)), dst=(40, 38))
    small = detect(img, DetectorParams(shift_vote_threshold=hi)).detected
    big = detect(img, DetectorParams(shift_vote_threshold=lo)).detected
    assert np.all(big | ~small)


def test_detect_accepts_gray_arrays_and_images(rng):
    img = _noise_with_clone(rng)
    a = detect(img).detected
    b = detect(Image(img[None], ColorSpace.GRAY)).detected
    assert np.array_equal(a, b)
    assert np.array_equal(to_gray(Image(img[None], ColorSpace.GRAY)), img)
