"""Imaging primitives against independent slow-path oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from rgbdfill import imaging
from rgbdfill.imaging import (
    FILL_VALUE,
    MaskGenerationError,
    MaskSynthConfig,
    apply_mask,
    canny_edges,
    composite,
    decode_label,
    denormalize,
    encode_label,
    normalize,
    resize,
    resize_nearest,
    rgb_to_gray,
    synth_mask,
)


# ----------------------------------------------------------------------
# masking and compositing

def test_apply_mask_per_pixel(rng):
    img = rng.random((9, 7, 3)).astype(np.float32)
    mask = (rng.random((9, 7)) < 0.4).astype(np.float32)
    out = apply_mask(img, mask)
    for y in range(9):
        for x in range(7):
            expected = FILL_VALUE if mask[y, x] == 1 else img[y, x]
            assert np.allclose(out[y, x], expected)


def test_apply_mask_single_channel(rng):
    img = rng.random((6, 6)).astype(np.float32)
    mask = np.zeros((6, 6), dtype=np.float32)
    mask[2, 3] = 1.0
    out = apply_mask(img, mask)
    assert out[2, 3] == FILL_VALUE
    assert np.array_equal(np.delete(out.ravel(), 2 * 6 + 3),
                          np.delete(img.ravel(), 2 * 6 + 3))


def test_composite_inverts_masking(rng):
    img = rng.random((8, 8, 3)).astype(np.float32)
    mask = (rng.random((8, 8)) < 0.5).astype(np.float32)
    out = composite(rng.random((8, 8, 3)).astype(np.float32), img, mask)
    known = mask == 0
    assert np.array_equal(out[known], img[known])


def test_composite_identity_on_full_mask(rng):
    raw = rng.random((5, 5)).astype(np.float32)
    out = composite(raw, rng.random((5, 5)).astype(np.float32), np.ones((5, 5), np.float32))
    assert np.array_equal(out, raw)


def test_mask_validation_rejects_nonbinary():
    with pytest.raises(ValueError):
        apply_mask(np.zeros((4, 4)), np.full((4, 4), 0.5))


def test_rgb_to_gray_weights():
    rgb = np.zeros((1, 3, 3), dtype=np.float32)
    rgb[0, 0] = [1, 0, 0]
    rgb[0, 1] = [0, 1, 0]
    rgb[0, 2] = [0, 0, 1]
    gray = rgb_to_gray(rgb)
    assert np.allclose(gray[0], [0.299, 0.587, 0.114])


# ----------------------------------------------------------------------
# contour extraction, checked against an explicit per-pixel reference

def _reflect(i, n):
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        if i >= n:
            i = 2 * n - i - 1
    return i


def _correlate_loops(img, kernel):
    kh, kw = kernel.shape
    hh, hw = kh // 2, kw // 2
    h, w = img.shape
    out = np.zeros_like(img, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for ky in range(kh):
                for kx in range(kw):
                    yy = _reflect(y + ky - hh, h)
                    xx = _reflect(x + kx - hw, w)
                    acc += kernel[ky, kx] * img[yy, xx]
            out[y, x] = acc
    return out


def _canny_reference(gray, low=100.0, high=200.0):
    """Loop implementation of the same pipeline, written independently."""
    half = 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2 * 1.4**2))
    gauss = np.outer(g1, g1)
    gauss /= gauss.sum()
    sx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)

    smoothed = _correlate_loops(np.asarray(gray, np.float64) * 255.0, gauss)
    gx = _correlate_loops(smoothed, sx)
    gy = _correlate_loops(smoothed, sx.T)
    h, w = smoothed.shape
    mag = np.hypot(gx, gy)

    def mval(y, x):
        if 0 <= y < h and 0 <= x < w:
            return mag[y, x]
        return 0.0

    thin = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            ang = np.degrees(np.arctan2(gy[y, x], gx[y, x])) % 180.0
            if ang < 22.5 or ang >= 157.5:
                dy, dx = 0, 1
            elif ang < 67.5:
                dy, dx = 1, 1
            elif ang < 112.5:
                dy, dx = 1, 0
            else:
                dy, dx = 1, -1
            m = mag[y, x]
            if m >= mval(y + dy, x + dx) and m > mval(y - dy, x - dx):
                thin[y, x] = m

    edges = np.zeros((h, w), dtype=bool)
    stack = [(y, x) for y in range(h) for x in range(w) if thin[y, x] >= high]
    while stack:
        y, x = stack.pop()
        if edges[y, x]:
            continue
        edges[y, x] = True
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and not edges[yy, xx] and thin[yy, xx] >= low:
                    stack.append((yy, xx))
    return edges.astype(np.float32)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_canny_matches_reference_on_random_images(seed):
    rng = np.random.default_rng(seed)
    base = rng.random((6, 6))
    gray = resize(base.astype(np.float32), 24, 24)  # smooth structure, real gradients
    got = canny_edges(gray, 60.0, 120.0)
    want = _canny_reference(gray, 60.0, 120.0)
    assert np.array_equal(got, want)


def test_canny_step_edge_single_pixel_line():
    gray = np.full((32, 32), 0.2, dtype=np.float32)
    gray[:, 16:] = 0.8
    edges = canny_edges(gray)
    per_row = edges.sum(axis=1)
    assert np.all(per_row == 1.0), "each row must carry exactly one edge pixel"
    cols = edges.argmax(axis=1)
    assert np.all(cols == cols[0]), "the line must be straight and contiguous"
    assert cols[0] in (15, 16)


def test_canny_flat_image_has_no_edges():
    assert canny_edges(np.full((16, 16), 0.4)).sum() == 0


def test_canny_weak_only_edges_are_dropped():
    # A small step: gradient magnitude lands between the thresholds.
    gray = np.full((24, 24), 0.5, dtype=np.float32)
    gray[:, 12:] = 0.58
    strong = canny_edges(gray, 10.0, 20.0)
    none = canny_edges(gray, 100.0, 200.0)
    assert strong.sum() > 0
    assert none.sum() == 0


def test_canny_rejects_bad_thresholds():
    with pytest.raises(ValueError):
        canny_edges(np.zeros((8, 8)), 200.0, 100.0)


# ----------------------------------------------------------------------
# stroke masks

def test_stamp_segment_distance_oracle():
    mask = np.zeros((20, 20), dtype=bool)
    p0, p1, width = (8.0, 3.0), (11.0, 15.0), 5
    imaging._stamp_segment(mask, p0, p1, width)
    d = np.array(p1) - np.array(p0)
    for y in range(20):
        for x in range(20):
            t = np.clip(((y - p0[0]) * d[0] + (x - p0[1]) * d[1]) / (d @ d), 0, 1)
            dist = np.hypot(y - p0[0] - t * d[0], x - p0[1] - t * d[1])
            assert mask[y, x] == (dist <= width / 2)


def test_synth_mask_deterministic_and_binary():
    cfg = MaskSynthConfig(seed=7)
    a = synth_mask(cfg, 64, 64)
    b = synth_mask(cfg, 64, 64)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {0.0, 1.0}


@pytest.mark.parametrize("seed", range(8))
def test_synth_mask_coverage_in_range(seed):
    cfg = MaskSynthConfig(seed=seed)
    mask = synth_mask(cfg, 64, 64)
    lo, hi = cfg.target_coverage_range
    assert lo <= mask.mean() <= hi


def test_synth_mask_unreachable_coverage_raises():
    cfg = MaskSynthConfig(target_coverage_range=(0.998, 0.999), max_attempts=5, seed=0)
    with pytest.raises(MaskGenerationError):
        synth_mask(cfg, 64, 64)


def test_mask_config_validation():
    with pytest.raises(ValueError):
        MaskSynthConfig(line_width_range=(5, 2)).validate()
    with pytest.raises(ValueError):
        MaskSynthConfig(target_coverage_range=(0.0, 0.4)).validate()


# ----------------------------------------------------------------------
# resizing

def test_resize_2x2_to_4x4_closed_form():
    img = np.array([[0.0, 1.0], [2.0, 3.0]], dtype=np.float32)
    # Half-pixel source coords {-0.25, 0.25, 0.75, 1.25} give these weights.
    w_axis = np.array([[1, 0], [0.75, 0.25], [0.25, 0.75], [0, 1]])
    expected = w_axis @ img @ w_axis.T
    assert np.allclose(resize(img, 4, 4), expected, atol=1e-6)


def test_resize_4x4_to_2x2_is_block_mean(rng):
    img = rng.random((4, 4, 3)).astype(np.float32)
    out = resize(img, 2, 2)
    for by in range(2):
        for bx in range(2):
            block = img[2 * by : 2 * by + 2, 2 * bx : 2 * bx + 2]
            assert np.allclose(out[by, bx], block.mean(axis=(0, 1)), atol=1e-6)


def test_resize_identity_and_constant(rng):
    img = rng.random((7, 5)).astype(np.float32)
    assert np.array_equal(resize(img, 7, 5), img)
    const = np.full((6, 6), 0.37, dtype=np.float32)
    assert np.allclose(resize(const, 13, 9), 0.37, atol=1e-6)


def test_resize_nearest_upscale_repeats():
    img = np.array([[1, 2], [3, 4]])
    out = resize_nearest(img, 4, 4)
    assert np.array_equal(out, np.repeat(np.repeat(img, 2, 0), 2, 1))
    assert out.dtype == img.dtype


def test_resize_nearest_preserves_value_set(rng):
    labels = rng.integers(0, 5, (31, 17))
    out = resize_nearest(labels, 64, 64)
    assert set(np.unique(out)) <= set(np.unique(labels))


# ----------------------------------------------------------------------
# value encodings

def test_normalize_denormalize_endpoints():
    assert normalize(np.array(0.0)) == -1.0
    assert normalize(np.array(1.0)) == 1.0
    assert denormalize(np.array(-1.0)) == 0.0
    assert denormalize(np.array(2.0)) == 1.0  # clamped


@given(st.integers(2, 40), st.integers(0, 39))
@settings(max_examples=60, deadline=None)
def test_label_encoding_roundtrip(num_classes, idx):
    idx = idx % num_classes
    plane = encode_label(np.array([[idx]]), num_classes)
    assert plane[0, 0] == pytest.approx(idx / (num_classes - 1))
    assert decode_label(plane, num_classes)[0, 0] == idx


def test_label_encoding_known_values():
    assert encode_label(np.array([9]), 19)[0] == pytest.approx(9 / 18)
    assert encode_label(np.array([36]), 37)[0] == pytest.approx(1.0)
    assert np.all(encode_label(np.array([0, 0]), 1) == 0.0)


# ----------------------------------------------------------------------
# PNG round trips

def test_png_roundtrip_8bit(tmp_path, rng):
    img = rng.random((16, 12, 3)).astype(np.float32)
    path = tmp_path / "x.png"
    imaging.write_png(path, img)
    back = imaging.read_png(path)
    assert back.shape == img.shape
    assert np.allclose(back, np.rint(img * 255) / 255, atol=1e-7)


def test_png_16bit_rescaled_by_peak(tmp_path):
    arr = np.array([[0, 1000], [2000, 4000]], dtype=np.uint16)
    path = tmp_path / "d.png"
    Image.fromarray(arr).save(path)
    back = imaging.read_png(path)
    assert np.allclose(back, arr / 4000.0)


def test_label_png_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 9, (10, 10))
    path = tmp_path / "l.png"
    imaging.write_label_png(path, labels)
    assert np.array_equal(imaging.read_label_png(path), labels)


def test_label_png_rejects_wide_ids(tmp_path):
    with pytest.raises(ValueError):
        imaging.write_label_png(tmp_path / "bad.png", np.array([[300]]))
