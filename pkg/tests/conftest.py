import numpy as np
import pytest

from rgbdfill.data import DatasetConfig, InpaintingDataset
from rgbdfill.models import ModelConfig
from rgbdfill.training import TrainConfig, Trainer


def tiny_dataset(n=8, size=64, seed=0, split=(1.0, 0.0, 0.0)):
    return InpaintingDataset(DatasetConfig(
        synthetic_samples=n, image_size=size, split_fractions=split, seed=seed,
    ))


def tiny_trainer(dataset=None, seed=0, out_dir=None, **model_kw):
    dataset = dataset or tiny_dataset()
    model_kw.setdefault("base_width", 8)
    model_kw.setdefault("disc_width", 8)
    model_kw.setdefault("extractor_width", 8)
    model_kw.setdefault("extractor", "random")
    mc = ModelConfig(**model_kw)
    tc = TrainConfig(seed=seed, batch_size=2, eval_every=0, checkpoint_every=0,
                     log_every=0)
    return Trainer(dataset, mc, tc, out_dir=out_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
