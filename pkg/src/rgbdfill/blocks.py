"""Low-level network blocks: gated convolutions and spectral normalization."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

__all__ = ["GatedConv2d", "GatedResidualBlock", "SpectralConv2d"]


class GatedConv2d(nn.Module):
    """Convolution with a learned soft gate per output element.

    A single convolution produces 2*out_channels maps that are split into
    a feature half and a gate half; the output is feature * sigmoid(gate).
    No normalization or activation is applied here, the enclosing block
    owns those.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding=0, padding_mode="zeros"):
        super().__init__()
        self.conv = nn.Conv2d(
            in_channels,
            out_channels * 2,
            kernel_size,
            stride=stride,
            padding=padding,
            padding_mode=padding_mode,
        )
        self.out_channels = out_channels

    def forward(self, x):
        feature, gate = torch.chunk(self.conv(x), 2, dim=1)
        return feature * torch.sigmoid(gate)


class GatedResidualBlock(nn.Module):
    """Two gated 3x3 convolutions with instance norm, added to the input.

    With all convolution weights and biases zero the gate sigmoid is 0.5
    but the feature half is 0, so the branch output is exactly 0 and the
    block is the identity.
    """

    def __init__(self, channels, padding_mode="reflect"):
        super().__init__()
        self.conv1 = GatedConv2d(channels, channels, 3, padding=1, padding_mode=padding_mode)
        self.norm1 = nn.InstanceNorm2d(channels, affine=True, eps=1e-5)
        self.conv2 = GatedConv2d(channels, channels, 3, padding=1, padding_mode=padding_mode)
        self.norm2 = nn.InstanceNorm2d(channels, affine=True, eps=1e-5)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h


def _l2_normalize(v, eps=1e-12):
    return v / (v.norm() + eps)


class SpectralConv2d(nn.Module):
    """Conv2d whose weight is divided by its largest singular value.

    The singular value is tracked with one power iteration per
    training-mode forward on the weight reshaped to
    (out_channels, in_channels * kh * kw). The left/right singular vector
    estimates are buffers, treated as constants when the normalized
    weight is built, so gradients flow through the raw weight only.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.weight = nn.Parameter(
            torch.empty(out_channels, in_channels, kernel_size, kernel_size)
        )
        self.bias = nn.Parameter(torch.zeros(out_channels))
        # Orthogonal start: every singular value is 1, so the one-step
        # estimate is already exact and the normalized weight is tightly
        # bounded from the first forward instead of after many iterations.
        nn.init.orthogonal_(self.weight)
        rows = out_channels
        cols = in_channels * kernel_size * kernel_size
        self.register_buffer("u", _l2_normalize(torch.randn(rows)))
        self.register_buffer("v", _l2_normalize(torch.randn(cols)))

    def _power_iteration(self, w_mat):
        with torch.no_grad():
            self.v.copy_(_l2_normalize(w_mat.t() @ self.u))
            self.u.copy_(_l2_normalize(w_mat @ self.v))

    def sigma(self):
        """Current spectral norm estimate, differentiable through the weight."""
        w_mat = self.weight.view(self.weight.shape[0], -1)
        # Clones decouple the estimate from later in-place buffer updates,
        # otherwise a second forward invalidates the first one's graph.
        return self.u.clone() @ w_mat @ self.v.clone()

    def forward(self, x):
        w_mat = self.weight.view(self.weight.shape[0], -1)
        if self.training:
            self._power_iteration(w_mat)
        weight_sn = self.weight / self.sigma()
        return F.conv2d(x, weight_sn, self.bias, stride=self.stride, padding=self.padding)
