"""Generators, patch discriminator, and the frozen feature extractor.

All generators work in model space: image planes scaled to [-1, 1], the
binary mask appended unscaled as an extra input channel. Encoders map to
a latent grid at 1/4 resolution with 4 * base_width channels; decoders
mirror the downsampling with nearest-neighbor upsampling and end in tanh.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import GatedConv2d, GatedResidualBlock, SpectralConv2d

log = logging.getLogger(__name__)

__all__ = [
    "ModelConfig",
    "ImageEncoder",
    "ImageDecoder",
    "EncoderDecoderGenerator",
    "FusionGenerator",
    "PatchDiscriminator",
    "FeatureExtractor",
    "InpaintingModel",
]


@dataclass
class ModelConfig:
    base_width: int = 64         # generator channel multiplier
    disc_width: int = 64         # discriminator channel multiplier
    extractor_width: int = 64    # random-extractor channel multiplier
    num_residual_blocks: int = 4
    use_edge: bool = True        # False freezes the edge branch and zeroes its latent
    use_label: bool = True
    extractor: str = "auto"      # "vgg16" | "random" | "auto"
    extractor_seed: int = 0

    def validate(self):
        if min(self.base_width, self.disc_width, self.extractor_width) < 1:
            raise ValueError("channel widths must be positive")
        if self.num_residual_blocks < 0:
            raise ValueError("num_residual_blocks must be >= 0")
        if self.extractor not in ("vgg16", "random", "auto"):
            raise ValueError(f"unknown extractor kind {self.extractor!r}")

    @property
    def latent_channels(self):
        return 4 * self.base_width


def _norm_act(channels):
    return [nn.InstanceNorm2d(channels, affine=True, eps=1e-5), nn.ReLU(inplace=True)]


class ImageEncoder(nn.Module):
    """Downsample by 4 with gated convolutions, then residual refinement."""

    def __init__(self, in_channels, base, n_res=4):
        super().__init__()
        layers = [GatedConv2d(in_channels, base, 7, padding=3, padding_mode="reflect")]
        layers += _norm_act(base)
        layers += [GatedConv2d(base, 2 * base, 4, stride=2, padding=1, padding_mode="reflect")]
        layers += _norm_act(2 * base)
        layers += [GatedConv2d(2 * base, 4 * base, 4, stride=2, padding=1, padding_mode="reflect")]
        layers += _norm_act(4 * base)
        layers += [GatedResidualBlock(4 * base) for _ in range(n_res)]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class ImageDecoder(nn.Module):
    """Mirror the encoder: two nearest-neighbor 2x upsamples, then tanh."""

    def __init__(self, out_channels, base):
        super().__init__()
        layers = [
            nn.Upsample(scale_factor=2, mode="nearest"),
            GatedConv2d(4 * base, 2 * base, 3, padding=1, padding_mode="reflect"),
        ]
        layers += _norm_act(2 * base)
        layers += [
            nn.Upsample(scale_factor=2, mode="nearest"),
            GatedConv2d(2 * base, base, 3, padding=1, padding_mode="reflect"),
        ]
        layers += _norm_act(base)
        layers += [nn.Conv2d(base, out_channels, 7, padding=3, padding_mode="reflect")]
        self.net = nn.Sequential(*layers)

    def forward(self, z):
        return torch.tanh(self.net(z))


class EncoderDecoderGenerator(nn.Module):
    """Single-plane generator (edge or label route)."""

    def __init__(self, in_channels, out_channels, base, n_res=4):
        super().__init__()
        self.encoder = ImageEncoder(in_channels + 1, base, n_res)
        self.decoder = ImageDecoder(out_channels, base)

    def encode(self, image, mask):
        return self.encoder(torch.cat([image, mask], dim=1))

    def forward(self, image, mask):
        z = self.encode(image, mask)
        return self.decoder(z), z


class FusionGenerator(nn.Module):
    """RGB and depth encoders fused with the regularizer latents.

    The four latent grids are concatenated and mixed by a gated 1x1
    convolution back to one latent width; the shared decoder emits four
    channels split into an RGB triple and a depth plane.
    """

    def __init__(self, base, n_res=4):
        super().__init__()
        self.rgb_encoder = ImageEncoder(3 + 1, base, n_res)
        self.depth_encoder = ImageEncoder(1 + 1, base, n_res)
        latent = 4 * base
        self.fuse = nn.Sequential(
            GatedConv2d(4 * latent, latent, 1),
            *_norm_act(latent),
        )
        self.decoder = ImageDecoder(4, base)

    def forward(self, masked_rgb, masked_depth, mask, z_edge, z_label):
        z_r = self.rgb_encoder(torch.cat([masked_rgb, mask], dim=1))
        z_d = self.depth_encoder(torch.cat([masked_depth, mask], dim=1))
        z = self.fuse(torch.cat([z_r, z_d, z_edge, z_label], dim=1))
        out = self.decoder(z)
        return out[:, :3], out[:, 3:4]


class PatchDiscriminator(nn.Module):
    """70-ish receptive field patch critic with spectral normalization.

    Five 4x4 convolutions, strides 2,2,2,1,1; a 256x256 input maps to a
    30x30 logit grid. Returns (logits, features) where features are the
    four LeakyReLU activations used for feature matching.
    """

    def __init__(self, in_channels, base=64):
        super().__init__()
        widths = [base, 2 * base, 4 * base, 8 * base]
        chans = [in_channels] + widths
        self.convs = nn.ModuleList(
            [SpectralConv2d(chans[i], chans[i + 1], 4, stride=(2 if i < 3 else 1), padding=1)
             for i in range(4)]
        )
        self.head = SpectralConv2d(widths[-1], 1, 4, stride=1, padding=1)

    def forward(self, x):
        features = []
        h = x
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.2)
            features.append(h)
        return self.head(h), features


_VGG_SLICES = ((0, 2), (2, 7), (7, 12), (12, 19), (19, 26))
_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


class FeatureExtractor(nn.Module):
    """Frozen 5-scale feature pyramid for perceptual and style losses.

    Prefers pretrained VGG16 slices (first activation of each of the five
    conv stages). When the weights cannot be obtained, e.g. no network
    access, falls back to a seeded randomly initialized conv pyramid that
    is likewise frozen; random features still define a usable perceptual
    metric for training. The resolved kind is exposed as ``self.kind``
    and must be persisted with checkpoints so scores stay comparable.

    Input is expected in [0, 1]; single-channel inputs are replicated to
    three channels.
    """

    def __init__(self, mode="auto", width=64, seed=0):
        super().__init__()
        if mode not in ("vgg16", "random", "auto"):
            raise ValueError(f"unknown extractor mode {mode!r}")
        self.kind = None
        if mode in ("vgg16", "auto"):
            try:
                self._build_vgg16()
                self.kind = "vgg16"
            except Exception as exc:
                if mode == "vgg16":
                    raise
                log.warning("pretrained extractor unavailable (%s); using seeded random", exc)
        if self.kind is None:
            self._build_random(width, seed)
            self.kind = "random"
        self.requires_grad_(False)
        self.eval()

    def _build_vgg16(self):
        from torchvision import models as tv_models

        features = tv_models.vgg16(weights=tv_models.VGG16_Weights.IMAGENET1K_V1).features
        self.blocks = nn.ModuleList(
            [nn.Sequential(*[features[i] for i in range(a, b)]) for a, b in _VGG_SLICES]
        )
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(1, 3, 1, 1))

    def _build_random(self, width, seed):
        widths = [width, 2 * width, 4 * width, 8 * width, 8 * width]
        chans = [3] + widths
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            blocks = []
            for i in range(5):
                layers = [] if i == 0 else [nn.AvgPool2d(2)]
                layers += [nn.Conv2d(chans[i], chans[i + 1], 3, padding=1), nn.ReLU()]
                blocks.append(nn.Sequential(*layers))
        self.blocks = nn.ModuleList(blocks)
        self.register_buffer("mean", torch.zeros(1, 3, 1, 1))
        self.register_buffer("std", torch.ones(1, 3, 1, 1))

    def train(self, mode=True):
        # Stays frozen in eval mode even inside a .train() model tree.
        return super().train(False)

    def forward(self, x01):
        if x01.shape[1] == 1:
            x01 = x01.repeat(1, 3, 1, 1)
        h = (x01 - self.mean) / self.std
        features = []
        for block in self.blocks:
            h = block(h)
            features.append(h)
        return features


class InpaintingModel(nn.Module):
    """All three generators behind one inference-oriented forward.

    Disabled branches (``use_edge=False`` / ``use_label=False``) keep
    their parameters but are never run; their latent is replaced by
    zeros, and their raw output is reported as None.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        b, n = config.base_width, config.num_residual_blocks
        self.edge_generator = EncoderDecoderGenerator(1, 1, b, n)
        self.label_generator = EncoderDecoderGenerator(1, 1, b, n)
        self.combined = FusionGenerator(b, n)

    def _zero_latent(self, mask):
        n, _, h, w = mask.shape
        c = self.config.latent_channels
        return torch.zeros(n, c, h // 4, w // 4, dtype=mask.dtype, device=mask.device)

    def forward(self, masked_rgb, masked_depth, masked_edge, masked_label, mask):
        """Inference pass; all image tensors in model space, mask in {0, 1}.

        Returns a dict with raw generator outputs rgb, depth, edge, label
        (edge/label None when the branch is disabled) plus both latents.
        """
        if self.config.use_edge:
            out_edge, z_edge = self.edge_generator(masked_edge, mask)
        else:
            out_edge, z_edge = None, self._zero_latent(mask)
        if self.config.use_label:
            out_label, z_label = self.label_generator(masked_label, mask)
        else:
            out_label, z_label = None, self._zero_latent(mask)
        out_rgb, out_depth = self.combined(masked_rgb, masked_depth, mask, z_edge, z_label)
        return {
            "rgb": out_rgb,
            "depth": out_depth,
            "edge": out_edge,
            "label": out_label,
            "z_edge": z_edge,
            "z_label": z_label,
        }
