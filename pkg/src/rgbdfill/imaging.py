"""Framework-free image primitives for the inpainting pipeline.

All functions operate on plain numpy arrays: RGB planes are (H, W, 3),
single-channel planes (depth, edge, encoded label) are (H, W), values in
[0, 1]. Masks are (H, W) with 1 marking a missing pixel. Everything here
is a pure function of its inputs; randomness only enters through explicit
seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .validation import check_mask, check_same_hw

__all__ = [
    "FILL_VALUE",
    "MaskSynthConfig",
    "MaskGenerationError",
    "apply_mask",
    "composite",
    "rgb_to_gray",
    "canny_edges",
    "synth_mask",
    "resize",
    "resize_nearest",
    "normalize",
    "denormalize",
    "encode_label",
    "decode_label",
    "read_png",
    "read_label_png",
    "write_png",
    "write_label_png",
]

# Hole fill value in [0, 1] space; maps to 0 after normalize() so holes carry
# no intensity signal in model space.
FILL_VALUE = 0.5


class MaskGenerationError(RuntimeError):
    """Raised when stroke sampling cannot reach the requested coverage."""


def _broadcast_mask(mask, image):
    if image.ndim == 3:
        return mask[:, :, None]
    return mask


def apply_mask(image, mask):
    """Blank out the masked pixels of ``image`` with the mid-gray fill.

    ``mask`` is 1 where pixels are missing. Output equals ``image`` on known
    pixels and ``FILL_VALUE`` on holes.
    """
    image = np.asarray(image, dtype=np.float32)
    mask = check_mask(mask)
    check_same_hw(image, mask, names=("image", "mask"))
    m = _broadcast_mask(mask, image)
    return image * (1.0 - m) + FILL_VALUE * m


def composite(raw_output, original, mask):
    """Paste generator output into the holes of ``original``.

    Known pixels (mask == 0) come from ``original``, hole pixels from
    ``raw_output``.
    """
    raw_output = np.asarray(raw_output, dtype=np.float32)
    original = np.asarray(original, dtype=np.float32)
    mask = check_mask(mask)
    check_same_hw(raw_output, original, mask, names=("raw_output", "original", "mask"))
    m = _broadcast_mask(mask, original)
    return original * (1.0 - m) + raw_output * m


def rgb_to_gray(rgb):
    """Luma grayscale conversion (weights 0.299 / 0.587 / 0.114)."""
    rgb = np.asarray(rgb, dtype=np.float32)
    if rgb.ndim == 2:
        return rgb
    return rgb[:, :, 0] * 0.299 + rgb[:, :, 1] * 0.587 + rgb[:, :, 2] * 0.114


def _gaussian_kernel(size=5, sigma=1.4):
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g1 = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g1, g1)
    return k / k.sum()

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def canny_edges(gray, low=100.0, high=200.0):
    """Binary edge map via the classic Canny pipeline.

    5x5 Gaussian smoothing (sigma 1.4), Sobel gradients, four-direction
    non-maximum suppression, then hysteresis with (low, high) thresholds on
    the 0-255 gradient-magnitude scale. Input is a single-channel image in
    [0, 1]; output is a {0, 1} float map of the same shape.
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim == 3:
        if gray.shape[2] != 1:
            raise ValueError(f"canny_edges expects a single channel, got {gray.shape[2]}")
        gray = gray[:, :, 0]
    if gray.ndim != 2:
        raise ValueError(f"canny_edges expects a 2-D image, got shape {gray.shape}")
    if not low < high:
        raise ValueError(f"canny thresholds require low < high, got ({low}, {high})")

    smoothed = ndimage.correlate(gray * 255.0, _gaussian_kernel(), mode="reflect")
    gx = ndimage.correlate(smoothed, _SOBEL_X, mode="reflect")
    gy = ndimage.correlate(smoothed, _SOBEL_Y, mode="reflect")
    mag = np.hypot(gx, gy)

    # Quantize gradient direction into 4 bins over [0, 180).
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    bins = np.zeros_like(angle, dtype=np.int8)
    bins[(angle >= 22.5) & (angle < 67.5)] = 1
    bins[(angle >= 67.5) & (angle < 112.5)] = 2
    bins[(angle >= 112.5) & (angle < 157.5)] = 3

    # Neighbor offsets along the gradient for each bin ((dy, dx) pairs).
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    keep = np.zeros((h, w), dtype=bool)
    for b, (dy, dx) in offsets.items():
        fwd = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        bwd = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        # >= on the forward side, > on the backward side: a symmetric
        # two-pixel ridge keeps exactly one pixel instead of none or both.
        keep |= (bins == b) & (mag >= fwd) & (mag > bwd)

    thin = np.where(keep, mag, 0.0)
    strong = thin >= high
    weak = thin >= low
    if not strong.any():
        return np.zeros((h, w), dtype=np.float32)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    good = np.zeros(n + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return good[labels].astype(np.float32)


@dataclass
class MaskSynthConfig:
    """Parameters for irregular free-form stroke masks.

    Ranges are inclusive (lo, hi) pairs; coverage is the fraction of hole
    pixels the finished mask must land in. ``seed`` makes the generator a
    pure function.
    """

    stroke_count_range: tuple = (3, 8)
    vertices_per_stroke_range: tuple = (4, 10)
    line_width_range: tuple = (4, 14)
    target_coverage_range: tuple = (0.1, 0.4)
    seed: int = 0
    max_attempts: int = 200

    def validate(self):
        for name in ("stroke_count_range", "vertices_per_stroke_range", "line_width_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise ValueError(f"{name}: invalid range ({lo}, {hi})")
        lo, hi = self.target_coverage_range
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"target_coverage_range: invalid range ({lo}, {hi})")

    def with_seed(self, seed):
        return MaskSynthConfig(
            self.stroke_count_range,
            self.vertices_per_stroke_range,
            self.line_width_range,
            self.target_coverage_range,
            int(seed),
            self.max_attempts,
        )


def _stamp_segment(mask, p0, p1, width):
    """Set mask pixels within width/2 of the segment p0-p1 (y, x coords)."""
    h, w = mask.shape
    r = width / 2.0
    y0 = max(0, int(np.floor(min(p0[0], p1[0]) - r)))
    y1 = min(h, int(np.ceil(max(p0[0], p1[0]) + r)) + 1)
    x0 = max(0, int(np.floor(min(p0[1], p1[1]) - r)))
    x1 = min(w, int(np.ceil(max(p0[1], p1[1]) + r)) + 1)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    d = np.array(p1, dtype=np.float64) - np.array(p0, dtype=np.float64)
    py = yy - p0[0]
    px = xx - p0[1]
    denom = d @ d
    if denom == 0.0:
        dist = np.hypot(py, px)
    else:
        t = np.clip((py * d[0] + px * d[1]) / denom, 0.0, 1.0)
        dist = np.hypot(py - t * d[0], px - t * d[1])
    mask[y0:y1, x0:x1] |= dist <= r


def _draw_strokes(rng, config, height, width):
    mask = np.zeros((height, width), dtype=bool)
    n_strokes = int(rng.integers(config.stroke_count_range[0], config.stroke_count_range[1] + 1))
    step_hi = max(2.0, min(height, width) / 3.0)
    step_lo = max(1.0, min(height, width) / 16.0)
    for _ in range(n_strokes):
        n_verts = int(
            rng.integers(config.vertices_per_stroke_range[0], config.vertices_per_stroke_range[1] + 1)
        )
        lw = int(rng.integers(config.line_width_range[0], config.line_width_range[1] + 1))
        pos = np.array([rng.uniform(0, height), rng.uniform(0, width)])
        for _ in range(max(1, n_verts - 1)):
            ang = rng.uniform(0, 2 * np.pi)
            step = rng.uniform(step_lo, step_hi)
            nxt = pos + step * np.array([np.sin(ang), np.cos(ang)])
            nxt[0] = np.clip(nxt[0], 0, height - 1)
            nxt[1] = np.clip(nxt[1], 0, width - 1)
            _stamp_segment(mask, pos, nxt, lw)
            pos = nxt
    return mask


def synth_mask(config, height, width):
    """Generate an irregular stroke mask with hole coverage in the target range.

    Strokes are random walks of thick polyline segments. Draws are repeated
    (up to ``config.max_attempts``) until the hole fraction lands inside
    ``target_coverage_range``; raises :class:`MaskGenerationError` otherwise.
    Deterministic for a fixed config (seed included).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    lo, hi = config.target_coverage_range
    for _ in range(config.max_attempts):
        mask = _draw_strokes(rng, config, height, width)
        coverage = mask.mean()
        if lo <= coverage <= hi:
            return mask.astype(np.float32)
    raise MaskGenerationError(
        f"coverage range ({lo}, {hi}) not reached in {config.max_attempts} attempts "
        f"at {height}x{width}"
    )


def resize(image, out_h, out_w):
    """Bilinear resize of a float image plane ((H, W) or (H, W, C))."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"invalid output size ({out_h}, {out_w})")
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    in_h, in_w, _ = image.shape
    if (in_h, in_w) == (out_h, out_w):
        out = image.copy()
        return out[:, :, 0] if squeeze else out

    # Half-pixel-center source coordinates, clamped to the edge so border
    # output replicates the border row/column.
    sy = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    fy = np.floor(sy).astype(int)
    fx = np.floor(sx).astype(int)
    y0 = np.clip(fy, 0, in_h - 1)
    x0 = np.clip(fx, 0, in_w - 1)
    y1 = np.clip(fy + 1, 0, in_h - 1)
    x1 = np.clip(fx + 1, 0, in_w - 1)
    wy = (sy - fy)[:, None, None]
    wx = (sx - fx)[None, :, None]

    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bot = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    out = (top * (1 - wy) + bot * wy).astype(np.float32)
    return out[:, :, 0] if squeeze else out


def resize_nearest(plane, out_h, out_w):
    """Nearest-neighbor resize; preserves class indices and binary masks."""
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"invalid output size ({out_h}, {out_w})")
    plane = np.asarray(plane)
    in_h, in_w = plane.shape[:2]
    iy = np.clip(np.floor((np.arange(out_h) + 0.5) * (in_h / out_h)).astype(int), 0, in_h - 1)
    ix = np.clip(np.floor((np.arange(out_w) + 0.5) * (in_w / out_w)).astype(int), 0, in_w - 1)
    return plane[iy][:, ix].copy()


def normalize(image):
    """Affine map from [0, 1] image space to [-1, 1] model space."""
    return np.asarray(image, dtype=np.float32) * 2.0 - 1.0


def denormalize(plane):
    """Inverse of :func:`normalize`; clamps out-of-range model output to [0, 1]."""
    return np.clip((np.asarray(plane, dtype=np.float32) + 1.0) / 2.0, 0.0, 1.0)


def encode_label(labels, num_classes):
    """Encode integer class indices as a single [0, 1] float plane."""
    labels = np.asarray(labels)
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    if num_classes == 1:
        return np.zeros(labels.shape, dtype=np.float32)
    return labels.astype(np.float32) / float(num_classes - 1)


def decode_label(plane, num_classes):
    """Recover class indices from an encoded label plane."""
    if num_classes == 1:
        return np.zeros(np.asarray(plane).shape, dtype=np.int64)
    return np.rint(np.asarray(plane) * (num_classes - 1)).astype(np.int64)


def read_png(path):
    """Read a PNG as a float image in [0, 1].

    8-bit grayscale / RGB divide by 255; 16-bit grayscale is rescaled by its
    per-image max (sensor depth maps). RGBA drops alpha.
    """
    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B"):
            arr = np.asarray(im, dtype=np.float64)
            peak = arr.max()
            return (arr / peak if peak > 0 else arr).astype(np.float32)
        if im.mode == "RGBA":
            im = im.convert("RGB")
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if len(im.getbands()) >= 3 else "L")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return arr


def read_label_png(path):
    """Read an 8-bit grayscale PNG as raw integer class indices."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.int64)


def write_png(path, image):
    """Write a [0, 1] float image as an 8-bit PNG."""
    arr = np.clip(np.asarray(image, dtype=np.float32), 0.0, 1.0)
    data = np.rint(arr * 255.0).astype(np.uint8)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    Image.fromarray(data).save(path)


def write_label_png(path, labels):
    """Write integer class indices as an 8-bit grayscale PNG."""
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("label indices must fit in 8 bits")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)
