"""Sample assembly: directory-backed and synthetic scenes, masks, batching.

A dataset is an immutable index of samples, each yielding ground-truth
planes (rgb, depth, edge, label) at the configured size. Masks are drawn
per request, so the same sample can be masked differently across
iterations while staying reproducible from (seed, iteration).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .imaging import MaskSynthConfig
from .validation import check_label_map

log = logging.getLogger(__name__)

__all__ = [
    "DatasetConfig",
    "SampleBundle",
    "SampleBatch",
    "InpaintingDataset",
    "synth_scene",
    "write_synth_dataset",
    "make_batch",
]


@dataclass
class DatasetConfig:
    root: str | None = None          # directory layout <root>/{rgb,depth,label}/<stem>.png
    synthetic_samples: int = 0       # used instead of root when root is None
    image_size: int = 256
    num_classes: int = 9
    canny_low: float = 100.0
    canny_high: float = 200.0
    mask_dir: str | None = None      # pre-made masks; default is stroke synthesis
    mask_synth: MaskSynthConfig = field(default_factory=MaskSynthConfig)
    split_fractions: tuple = (0.8, 0.1, 0.1)
    seed: int = 0

    def validate(self):
        if self.root is None and self.synthetic_samples <= 0:
            raise ValueError("either root or synthetic_samples must be set")
        if abs(sum(self.split_fractions) - 1.0) > 1e-6:
            raise ValueError(f"split fractions must sum to 1, got {self.split_fractions}")
        if self.image_size <= 0:
            raise ValueError("image_size must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")


@dataclass
class SampleBundle:
    """One training/eval sample: truths, mask, and masked inputs."""

    rgb: np.ndarray          # (H, W, 3)
    depth: np.ndarray        # (H, W)
    edge: np.ndarray         # (H, W) binary
    label: np.ndarray        # (H, W) encoded in [0, 1]
    mask: np.ndarray         # (H, W) binary, 1 = hole
    masked_rgb: np.ndarray
    masked_depth: np.ndarray
    masked_edge: np.ndarray
    masked_label: np.ndarray

    @classmethod
    def from_truths(cls, rgb, depth, edge, label, mask):
        return cls(
            rgb=rgb,
            depth=depth,
            edge=edge,
            label=label,
            mask=mask,
            masked_rgb=imaging.apply_mask(rgb, mask),
            masked_depth=imaging.apply_mask(depth, mask),
            masked_edge=imaging.apply_mask(edge, mask),
            masked_label=imaging.apply_mask(label, mask),
        )


@dataclass
class SampleBatch:
    """SampleBundle planes stacked with a leading batch dimension."""

    rgb: np.ndarray          # (N, H, W, 3)
    depth: np.ndarray        # (N, H, W)
    edge: np.ndarray
    label: np.ndarray
    mask: np.ndarray
    masked_rgb: np.ndarray
    masked_depth: np.ndarray
    masked_edge: np.ndarray
    masked_label: np.ndarray

    def __len__(self):
        return self.rgb.shape[0]


def synth_scene(seed, size, num_classes):
    """Render a flat-shaded scene of random rectangles and ellipses.

    Returns (rgb, depth, label_map). Shapes are painted back to front; the
    topmost shape at each pixel defines the label id (background 0) and the
    depth value (nearer shapes brighter). Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    n_shapes = int(rng.integers(3, 9))
    rgb = np.empty((size, size, 3), dtype=np.float32)
    rgb[:] = rng.uniform(0.05, 0.35, size=3).astype(np.float32)
    depth = np.full((size, size), 0.1, dtype=np.float32)
    label = np.zeros((size, size), dtype=np.int64)

    yy, xx = np.mgrid[0:size, 0:size]
    for k in range(n_shapes):
        cy, cx = rng.uniform(0.15 * size, 0.85 * size, size=2)
        ry = rng.uniform(0.08 * size, 0.3 * size)
        rx = rng.uniform(0.08 * size, 0.3 * size)
        if rng.random() < 0.5:
            inside = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        else:
            inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        color = rng.uniform(0.1, 0.95, size=3).astype(np.float32)
        rgb[inside] = color
        # Painter's order: shape k is nearer than shape k-1.
        depth[inside] = 0.2 + 0.75 * (k + 1) / n_shapes
        label[inside] = k % (num_classes - 1) + 1
    return rgb, depth, label


class InpaintingDataset:
    """Immutable ordered index of samples with train/val/test splits."""

    def __init__(self, config: DatasetConfig):
        config.validate()
        self.config = config
        if config.root is not None:
            self._stems = self._scan_directory(Path(config.root))
            self._synthetic = False
        else:
            self._stems = [f"synth_{i:05d}" for i in range(config.synthetic_samples)]
            self._synthetic = True
        if not self._stems:
            raise RuntimeError("dataset is empty")
        self._mask_paths = None
        if config.mask_dir is not None:
            self._mask_paths = sorted(Path(config.mask_dir).glob("*.png"))
            if not self._mask_paths:
                raise RuntimeError(f"no PNG masks under {config.mask_dir}")
        self.splits = self._make_splits()

    def _scan_directory(self, root):
        subdirs = {name: root / name for name in ("rgb", "depth", "label")}
        for name, d in subdirs.items():
            if not d.is_dir():
                raise RuntimeError(f"missing dataset subdirectory {d}")
        stems = {d: {p.stem for p in d.glob("*.png")} for d in subdirs.values()}
        common = sorted(set.intersection(*stems.values()))
        skipped = len(set.union(*stems.values())) - len(common)
        if skipped:
            log.warning("skipped %d sample(s) with missing counterpart files", skipped)
        self.skipped = skipped
        return common

    def _make_splits(self):
        n = len(self._stems)
        order = np.random.default_rng(self.config.seed).permutation(n)
        f_train, f_val, _ = self.config.split_fractions
        n_train = int(round(n * f_train))
        n_val = int(round(n * f_val))
        n_train = min(n_train, n)
        n_val = min(n_val, n - n_train)
        return {
            "train": sorted(order[:n_train].tolist()),
            "val": sorted(order[n_train : n_train + n_val].tolist()),
            "test": sorted(order[n_train + n_val :].tolist()),
        }

    def __len__(self):
        return len(self._stems)

    def stem(self, index):
        return self._stems[index]

    def load_truths(self, index):
        """Ground-truth (rgb, depth, edge, label_plane) at the configured size."""
        cfg = self.config
        size = cfg.image_size
        if self._synthetic:
            rgb, depth, label_map = synth_scene(
                np.random.default_rng((cfg.seed, 1, index)).integers(2**31),
                size,
                cfg.num_classes,
            )
        else:
            root = Path(cfg.root)
            stem = self._stems[index]
            rgb = imaging.read_png(root / "rgb" / f"{stem}.png")
            depth = imaging.read_png(root / "depth" / f"{stem}.png")
            label_map = imaging.read_label_png(root / "label" / f"{stem}.png")
            if rgb.ndim != 3:
                rgb = np.repeat(rgb[:, :, None], 3, axis=2)
            rgb = imaging.resize(rgb, size, size)
            depth = imaging.resize(depth, size, size)
            label_map = imaging.resize_nearest(label_map, size, size)
        label_map = check_label_map(label_map, cfg.num_classes)
        edge = imaging.canny_edges(imaging.rgb_to_gray(rgb), cfg.canny_low, cfg.canny_high)
        label = imaging.encode_label(label_map, cfg.num_classes)
        return rgb, depth, edge, label

    def draw_mask(self, mask_seed):
        size = self.config.image_size
        if self._mask_paths is not None:
            rng = np.random.default_rng(mask_seed)
            path = self._mask_paths[int(rng.integers(len(self._mask_paths)))]
            mask = (imaging.read_png(path) > 0.5).astype(np.float32)
            if mask.ndim == 3:
                mask = mask[:, :, 0]
            return imaging.resize_nearest(mask, size, size)
        return imaging.synth_mask(self.config.mask_synth.with_seed(mask_seed), size, size)

    def sample(self, index, mask_seed):
        rgb, depth, edge, label = self.load_truths(index)
        mask = self.draw_mask(mask_seed)
        return SampleBundle.from_truths(rgb, depth, edge, label, mask)

    def write_split_manifest(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, idx in self.splits.items():
            lines = [self._stems[i] for i in idx]
            (out_dir / f"split_{name}.txt").write_text("\n".join(lines) + "\n")


def make_batch(indices, dataset, mask_seeds):
    """Assemble a batch of samples with per-sample independent masks."""
    if len(indices) != len(mask_seeds):
        raise ValueError("indices and mask_seeds must have equal length")
    bundles = []
    for i, ms in zip(indices, mask_seeds):
        if not 0 <= i < len(dataset):
            raise IndexError(f"sample index {i} out of range [0, {len(dataset)})")
        bundles.append(dataset.sample(i, ms))
    stack = lambda attr: np.stack([getattr(b, attr) for b in bundles])
    return SampleBatch(**{f: stack(f) for f in SampleBatch.__dataclass_fields__})


def write_synth_dataset(out_dir, count, seed, size=256, num_classes=9):
    """Write ``count`` synthetic rgb/depth/label PNG triples in the loader layout."""
    out_dir = Path(out_dir)
    for sub in ("rgb", "depth", "label"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    for i in range(count):
        rgb, depth, label = synth_scene(
            np.random.default_rng((seed, 1, i)).integers(2**31), size, num_classes
        )
        stem = f"synth_{i:05d}"
        imaging.write_png(out_dir / "rgb" / f"{stem}.png", rgb)
        imaging.write_png(out_dir / "depth" / f"{stem}.png", depth)
        imaging.write_label_png(out_dir / "label" / f"{stem}.png", label)
    return out_dir
