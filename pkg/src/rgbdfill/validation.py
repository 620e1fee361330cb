"""Input validation helpers shared by the image ops and the estimator API.

Conventions enforced here:

* image planes are float arrays of shape (H, W, C) with values in [0, 1],
  C in {1, 3};
* masks are (H, W) arrays with values exactly in {0, 1}, 1 marking a
  missing pixel;
* label maps are (H, W) integer arrays with class indices in
  [0, num_classes).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_image",
    "check_mask",
    "check_label_map",
    "check_same_hw",
]

_RANGE_TOL = 1e-6


def check_image(image, name="image", channels=None):
    """Validate an image plane and return it as float32 (H, W, C).

    A 2-D array is promoted to (H, W, 1). Raises ``ValueError`` on wrong
    rank, channel count outside {1, 3}, empty dims, non-finite values or
    values outside [0, 1].
    """
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name}: expected 2-D or 3-D array, got shape {arr.shape}")
    h, w, c = arr.shape
    if h <= 0 or w <= 0:
        raise ValueError(f"{name}: empty spatial dims {arr.shape}")
    if c not in (1, 3):
        raise ValueError(f"{name}: channel count must be 1 or 3, got {c}")
    if channels is not None and c != channels:
        raise ValueError(f"{name}: expected {channels} channel(s), got {c}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    if arr.min() < -_RANGE_TOL or arr.max() > 1.0 + _RANGE_TOL:
        raise ValueError(
            f"{name}: values outside [0, 1] (min={arr.min():.4g}, max={arr.max():.4g})"
        )
    return np.clip(arr, 0.0, 1.0)


def check_mask(mask, name="mask"):
    """Validate a binary hole mask and return it as float32 (H, W)."""
    arr = np.asarray(mask)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected 2-D array, got shape {arr.shape}")
    arr = arr.astype(np.float32)
    if not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError(f"{name}: values must be exactly 0 or 1")
    return arr


def check_label_map(labels, num_classes, name="labels"):
    """Validate an integer class-index map and return it as int64 (H, W)."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected 2-D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.allclose(arr, rounded):
            raise ValueError(f"{name}: non-integer class indices")
        arr = rounded
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= num_classes:
        raise ValueError(
            f"{name}: class indices must lie in [0, {num_classes}), "
            f"got [{arr.min()}, {arr.max()}]"
        )
    return arr


def check_same_hw(*arrays, names=None):
    """Require that every array shares the same leading (H, W) dims."""
    shapes = [np.asarray(a).shape[:2] for a in arrays]
    if len(set(shapes)) > 1:
        labels = names or [f"arg{i}" for i in range(len(arrays))]
        detail = ", ".join(f"{n}={s}" for n, s in zip(labels, shapes))
        raise ValueError(f"spatial dimension mismatch: {detail}")
