"""Scikit-learn style facade over the trainer and inference path.

``RGBDInpainter`` exposes fit/predict/score with plain keyword
hyperparameters, so it composes with sklearn tooling (get_params,
clone, grid search). The heavy lifting stays in Trainer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import imaging
from .data import DatasetConfig, InpaintingDataset, SampleBundle
from .losses import LossWeights
from .models import ModelConfig
from .training import TrainConfig, Trainer
from .validation import check_image, check_label_map, check_mask, check_same_hw

__all__ = ["RGBDInpainter"]


class RGBDInpainter(BaseEstimator):
    """Inpaints RGB and depth jointly, regularized by edge and label routes.

    Parameters mirror the model/training configuration dataclasses; the
    fitted state lives in trailing-underscore attributes.
    """

    def __init__(self, image_size=256, base_width=64, disc_width=64,
                 extractor_width=64, num_residual_blocks=4, use_edge=True,
                 use_label=True, extractor="auto", num_classes=9,
                 num_iterations=2000, batch_size=2, learning_rate=1e-4,
                 seed=0, eval_every=0, checkpoint_every=0, out_dir=None):
        self.image_size = image_size
        self.base_width = base_width
        self.disc_width = disc_width
        self.extractor_width = extractor_width
        self.num_residual_blocks = num_residual_blocks
        self.use_edge = use_edge
        self.use_label = use_label
        self.extractor = extractor
        self.num_classes = num_classes
        self.num_iterations = num_iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.eval_every = eval_every
        self.checkpoint_every = checkpoint_every
        self.out_dir = out_dir

    def _configs(self):
        model = ModelConfig(
            base_width=self.base_width,
            disc_width=self.disc_width,
            extractor_width=self.extractor_width,
            num_residual_blocks=self.num_residual_blocks,
            use_edge=self.use_edge,
            use_label=self.use_label,
            extractor=self.extractor,
        )
        train = TrainConfig(
            seed=self.seed,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            num_iterations=self.num_iterations,
            eval_every=self.eval_every,
            checkpoint_every=self.checkpoint_every,
        )
        return model, train

    def fit(self, X, y=None):
        """Train on a dataset.

        X may be an InpaintingDataset, a DatasetConfig, a directory path
        with rgb/depth/label subdirectories, or an int count of
        synthetic samples.
        """
        if isinstance(X, InpaintingDataset):
            dataset = X
        elif isinstance(X, DatasetConfig):
            dataset = InpaintingDataset(X)
        elif isinstance(X, (int, np.integer)):
            dataset = InpaintingDataset(DatasetConfig(
                synthetic_samples=int(X), image_size=self.image_size,
                num_classes=self.num_classes, seed=self.seed,
            ))
        elif isinstance(X, str):
            dataset = InpaintingDataset(DatasetConfig(
                root=X, image_size=self.image_size,
                num_classes=self.num_classes, seed=self.seed,
            ))
        else:
            raise TypeError(f"cannot build a dataset from {type(X).__name__}")
        model_config, train_config = self._configs()
        self.trainer_ = Trainer(dataset, model_config, train_config,
                                LossWeights(), out_dir=self.out_dir)
        self.trainer_.run()
        self.n_iter_ = self.trainer_.iteration
        self.dataset_ = dataset
        return self

    def _predict_one(self, sample):
        if not isinstance(sample, dict):
            raise TypeError("each sample must be a dict of planes")
        rgb = check_image(sample["rgb"], "rgb", channels=3)
        depth = check_image(sample["depth"], "depth", channels=1)[:, :, 0]
        mask = check_mask(sample["mask"], "mask")
        check_same_hw(rgb, depth, mask, names=("rgb", "depth", "mask"))
        if "edge" in sample and sample["edge"] is not None:
            edge = check_mask(sample["edge"], "edge")
        else:
            edge = imaging.canny_edges(imaging.rgb_to_gray(rgb))
        if "label" in sample and sample["label"] is not None:
            label_map = check_label_map(sample["label"], self.num_classes)
            label = imaging.encode_label(label_map, self.num_classes)
        else:
            label = np.zeros(rgb.shape[:2], dtype=np.float32)
        size = self.trainer_.dataset.config.image_size
        h, w = rgb.shape[:2]
        bundle = SampleBundle.from_truths(
            imaging.resize(rgb, size, size),
            imaging.resize(depth, size, size),
            imaging.resize_nearest(edge, size, size),
            imaging.resize_nearest(label, size, size),
            imaging.resize_nearest(mask, size, size),
        )
        out = self.trainer_.infer(bundle)
        raw_rgb = imaging.resize(out["raw_rgb"], h, w)
        raw_depth = imaging.resize(out["raw_depth"], h, w)
        return {
            "rgb": imaging.composite(raw_rgb, rgb, mask),
            "depth": imaging.composite(raw_depth, depth, mask),
        }

    def predict(self, X):
        """Inpaint one sample dict or a list of them.

        Each sample needs ``rgb``, ``depth``, and ``mask``; ``edge`` and
        ``label`` are derived (contour detection / all-background) when
        absent. Returns composited rgb and depth planes in [0, 1].
        """
        check_is_fitted(self, "trainer_")
        if isinstance(X, dict):
            return self._predict_one(X)
        return [self._predict_one(s) for s in X]

    def score(self, X=None, y=None):
        """Mean structural similarity of inpainted RGB on held-out samples."""
        check_is_fitted(self, "trainer_")
        split = "val" if self.trainer_.dataset.splits["val"] else "train"
        return float(self.trainer_.evaluate(split)["rgb_ssim"])

    def evaluate(self, split="val"):
        check_is_fitted(self, "trainer_")
        return self.trainer_.evaluate(split)
