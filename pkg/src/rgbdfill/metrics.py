"""Full-reference image quality metrics on [0, 1] float arrays.

All functions accept (H, W) or (H, W, C) arrays and reduce over channels
by averaging. ``region_mask`` restricts error metrics to hole pixels
(mask value 1) so scores can be reported for inpainted regions only.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = ["ssim", "psnr", "mae", "rmse", "evaluate_pair"]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _ssim_window():
    half = _SSIM_WINDOW // 2
    g = np.exp(-0.5 * (np.arange(_SSIM_WINDOW) - half) ** 2 / _SSIM_SIGMA**2)
    w = np.outer(g, g)
    return (w / w.sum()).astype(np.float64)


def _as_channels(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[:, :, None]
    if x.ndim == 3:
        return x
    raise ValueError(f"expected 2-D or 3-D image, got shape {x.shape}")


def ssim(pred, truth, data_range=1.0):
    """Mean structural similarity over valid (fully interior) windows.

    Gaussian-weighted 11x11 local statistics; windows overlapping the
    border are excluded rather than padded, so images must be at least
    11 pixels on each side. Channels are scored independently and
    averaged.
    """
    p = _as_channels(pred)
    t = _as_channels(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    h, w = p.shape[:2]
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than the {_SSIM_WINDOW}-pixel window")
    window = _ssim_window()
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    half = _SSIM_WINDOW // 2
    interior = (slice(half, h - half), slice(half, w - half))

    def filt(img):
        return ndimage.correlate(img, window, mode="constant")[interior]

    scores = []
    for c in range(p.shape[2]):
        x, y = p[:, :, c], t[:, :, c]
        mu_x = filt(x)
        mu_y = filt(y)
        xx = filt(x * x) - mu_x**2
        yy = filt(y * y) - mu_y**2
        xy = filt(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def _selected(pred, truth, region_mask):
    p = _as_channels(pred)
    t = _as_channels(truth)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    if region_mask is None:
        return p, t
    m = np.asarray(region_mask) > 0.5
    if m.shape != p.shape[:2]:
        raise ValueError(f"mask shape {m.shape} does not match image {p.shape[:2]}")
    if not m.any():
        raise ValueError("region mask selects no pixels")
    return p[m], t[m]


def psnr(pred, truth, data_range=1.0, region_mask=None):
    """Peak signal-to-noise ratio in dB; identical inputs give inf."""
    p, t = _selected(pred, truth, region_mask)
    mse = float(np.mean((p - t) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / mse))


def mae(pred, truth, region_mask=None):
    """Mean absolute error on the 0-255 intensity scale."""
    p, t = _selected(pred, truth, region_mask)
    return float(np.mean(np.abs(p - t)) * 255.0)


def rmse(pred, truth, region_mask=None):
    """Root-mean-square error on the 0-255 intensity scale."""
    p, t = _selected(pred, truth, region_mask)
    return float(np.sqrt(np.mean((p - t) ** 2)) * 255.0)


def evaluate_pair(pred, truth, region_mask=None):
    """All four metrics as a flat dict. SSIM is always full-image."""
    return {
        "ssim": ssim(pred, truth),
        "psnr": psnr(pred, truth, region_mask=region_mask),
        "mae": mae(pred, truth, region_mask=region_mask),
        "rmse": rmse(pred, truth, region_mask=region_mask),
    }
