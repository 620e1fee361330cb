"""Loss primitives and their weighting for the three-route objective.

Adversarial terms use the non-saturating sigmoid cross-entropy form, so
all-zero logits give ln 2 for a generator term and 2 ln 2 for a
discriminator term. Feature matching, perceptual, and style losses are
plain sums over their layer lists, no implicit layer weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

__all__ = [
    "LossWeights",
    "to_unit",
    "generator_adversarial",
    "discriminator_adversarial",
    "feature_matching",
    "gram_matrix",
    "perceptual_loss",
    "style_loss",
]


@dataclass
class LossWeights:
    """Per-term weights. Defaults are the tuned full-system values."""

    fm_edge: float = 10.0
    fm_label: float = 15.0
    fm_rgb: float = 5.0
    fm_depth: float = 5.0
    perc_rgb: float = 3.0
    perc_depth: float = 2.0
    style_rgb: float = 2.0
    style_depth: float = 3.0
    adv_g_rgb: float = 0.005
    adv_g_depth: float = 0.01
    adv_g_edge: float = 1.0
    adv_g_label: float = 1.0
    adv_d: float = 1.0

    def validate(self):
        for name, value in vars(self).items():
            if not value >= 0:
                raise ValueError(f"loss weight {name} must be >= 0, got {value}")


def to_unit(x):
    """Model space [-1, 1] to [0, 1] without clamping, gradients intact."""
    return (x + 1.0) * 0.5


def generator_adversarial(logits_fake):
    """Non-saturating generator term: push fake logits toward real."""
    return F.binary_cross_entropy_with_logits(logits_fake, torch.ones_like(logits_fake))


def discriminator_adversarial(logits_real, logits_fake):
    """Real toward 1, fake toward 0; the two means are summed."""
    return F.binary_cross_entropy_with_logits(
        logits_real, torch.ones_like(logits_real)
    ) + F.binary_cross_entropy_with_logits(logits_fake, torch.zeros_like(logits_fake))


def feature_matching(features_fake, features_real):
    """Sum over layers of mean squared feature difference.

    The real branch is detached: this term trains the generator against
    the discriminator's representation, not the other way around.
    """
    total = features_fake[0].new_zeros(())
    for fake, real in zip(features_fake, features_real, strict=True):
        total = total + F.mse_loss(fake, real.detach())
    return total


def gram_matrix(features):
    """Per-sample channel covariance A @ A.T with A of shape (C, H*W)."""
    n, c, h, w = features.shape
    a = features.reshape(n, c, h * w)
    return a @ a.transpose(1, 2)


def perceptual_loss(features_fake, features_real):
    """Sum over layers of mean absolute feature difference."""
    total = features_fake[0].new_zeros(())
    for fake, real in zip(features_fake, features_real, strict=True):
        total = total + F.l1_loss(fake, real.detach())
    return total


def style_loss(features_fake, features_real):
    """Gram-matrix distance, each layer scaled by 1 / (C * H * W).

    Per layer: the entrywise l1 norm of the Gram difference, averaged
    over the batch, times 1 / (C_n * H_n * W_n).
    """
    total = features_fake[0].new_zeros(())
    for fake, real in zip(features_fake, features_real, strict=True):
        _, c, h, w = fake.shape
        diff = gram_matrix(fake) - gram_matrix(real.detach())
        total = total + diff.abs().sum(dim=(1, 2)).mean() / (c * h * w)
    return total
