"""Quality metrics against brute-force per-window references."""

import numpy as np
import pytest

from rgbdfill import metrics


def _ssim_reference(pred, truth, data_range=1.0):
    """Direct per-window evaluation of the SSIM definition."""
    win, sigma, k1, k2 = 11, 1.5, 0.01, 0.03
    half = win // 2
    g = np.exp(-0.5 * (np.arange(win) - half) ** 2 / sigma**2)
    w = np.outer(g, g)
    w /= w.sum()
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def channel(x, y):
        h, ww = x.shape
        vals = []
        for cy in range(half, h - half):
            for cx in range(half, ww - half):
                px = x[cy - half : cy + half + 1, cx - half : cx + half + 1]
                py = y[cy - half : cy + half + 1, cx - half : cx + half + 1]
                mx = (w * px).sum()
                my = (w * py).sum()
                vx = (w * (px - mx) ** 2).sum()
                vy = (w * (py - my) ** 2).sum()
                cxy = (w * (px - mx) * (py - my)).sum()
                vals.append(
                    ((2 * mx * my + c1) * (2 * cxy + c2))
                    / ((mx**2 + my**2 + c1) * (vx + vy + c2))
                )
        return np.mean(vals)

    pred = np.asarray(pred, np.float64)
    truth = np.asarray(truth, np.float64)
    if pred.ndim == 2:
        return channel(pred, truth)
    return np.mean([channel(pred[:, :, c], truth[:, :, c]) for c in range(pred.shape[2])])


@pytest.mark.parametrize("seed", [0, 1])
def test_ssim_matches_reference(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((16, 18)).astype(np.float32)
    b = np.clip(a + 0.1 * rng.standard_normal((16, 18)), 0, 1).astype(np.float32)
    assert metrics.ssim(a, b) == pytest.approx(_ssim_reference(a, b), abs=1e-6)


def test_ssim_matches_reference_multichannel():
    rng = np.random.default_rng(2)
    a = rng.random((14, 14, 3))
    b = rng.random((14, 14, 3))
    assert metrics.ssim(a, b) == pytest.approx(_ssim_reference(a, b), abs=1e-6)


def test_ssim_identical_is_one():
    rng = np.random.default_rng(3)
    a = rng.random((20, 20))
    assert metrics.ssim(a, a) == pytest.approx(1.0, abs=1e-9)


def test_ssim_constant_planes_closed_form():
    zeros = np.zeros((16, 16))
    ones = np.ones((16, 16))
    c1 = 0.01**2
    assert metrics.ssim(zeros, ones) == pytest.approx(c1 / (1 + c1), abs=1e-12)


def test_ssim_symmetric():
    rng = np.random.default_rng(4)
    a, b = rng.random((13, 13)), rng.random((13, 13))
    assert metrics.ssim(a, b) == pytest.approx(metrics.ssim(b, a), abs=1e-12)


def test_ssim_channel_mean():
    rng = np.random.default_rng(5)
    a, b = rng.random((12, 12, 3)), rng.random((12, 12, 3))
    per = [metrics.ssim(a[:, :, c], b[:, :, c]) for c in range(3)]
    assert metrics.ssim(a, b) == pytest.approx(np.mean(per), abs=1e-12)


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((8, 8)), np.zeros((8, 8)))


# ----------------------------------------------------------------------
# pixel error metrics

def test_psnr_known_value():
    a = np.zeros((8, 8))
    b = np.full((8, 8), 0.1)
    assert metrics.psnr(a, b) == pytest.approx(20.0, abs=1e-9)


def test_psnr_identical_is_inf():
    a = np.full((5, 5), 0.3)
    assert metrics.psnr(a, a.copy()) == float("inf")


def test_mae_rmse_known_values():
    a = np.zeros((4, 4))
    b = np.full((4, 4), 0.1)
    assert metrics.mae(a, b) == pytest.approx(25.5, abs=1e-9)
    assert metrics.rmse(a, b) == pytest.approx(25.5, abs=1e-9)


def test_mae_rmse_per_pixel_oracle():
    rng = np.random.default_rng(6)
    a, b = rng.random((7, 9, 3)), rng.random((7, 9, 3))
    diff = a - b
    assert metrics.mae(a, b) == pytest.approx(np.mean(np.abs(diff)) * 255, rel=1e-9)
    assert metrics.rmse(a, b) == pytest.approx(np.sqrt(np.mean(diff**2)) * 255, rel=1e-9)


def test_region_mask_restricts_errors():
    a = np.zeros((10, 10))
    b = np.zeros((10, 10))
    mask = np.zeros((10, 10))
    mask[:5] = 1.0
    b[:5] = 0.2  # error only inside the region
    assert metrics.mae(a, b, region_mask=mask) == pytest.approx(0.2 * 255, rel=1e-9)
    assert metrics.mae(a, b) == pytest.approx(0.1 * 255, rel=1e-9)
    assert metrics.psnr(a, b, region_mask=1 - mask) == float("inf")


def test_region_mask_validation():
    a = np.zeros((10, 10))
    with pytest.raises(ValueError):
        metrics.mae(a, a, region_mask=np.zeros((10, 10)))  # empty region
    with pytest.raises(ValueError):
        metrics.mae(a, a, region_mask=np.ones((4, 4)))  # shape mismatch


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        metrics.mae(np.zeros((4, 4)), np.zeros((5, 5)))


def test_evaluate_pair_keys():
    rng = np.random.default_rng(7)
    a, b = rng.random((12, 12)), rng.random((12, 12))
    out = metrics.evaluate_pair(a, b, region_mask=(a > 0.5).astype(np.float32))
    assert set(out) == {"ssim", "psnr", "mae", "rmse"}
    assert all(np.isfinite(v) for v in out.values())
