"""Joint RGB and depth inpainting with edge and label regularizer routes."""

from .data import DatasetConfig, InpaintingDataset, SampleBatch, SampleBundle
from .estimator import RGBDInpainter
from .imaging import MaskGenerationError, MaskSynthConfig
from .losses import LossWeights
from .models import InpaintingModel, ModelConfig
from .training import CheckpointError, TrainConfig, Trainer, TrainingDivergedError

__version__ = "0.1.0"

__all__ = [
    "DatasetConfig",
    "InpaintingDataset",
    "SampleBatch",
    "SampleBundle",
    "RGBDInpainter",
    "MaskGenerationError",
    "MaskSynthConfig",
    "LossWeights",
    "InpaintingModel",
    "ModelConfig",
    "CheckpointError",
    "TrainConfig",
    "Trainer",
    "TrainingDivergedError",
    "__version__",
]
