"""Gated convolution semantics and spectral normalization behavior."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from rgbdfill.blocks import GatedConv2d, GatedResidualBlock, SpectralConv2d


def test_gated_conv_is_feature_times_sigmoid_gate():
    torch.manual_seed(0)
    gc = GatedConv2d(3, 5, 3, padding=1)
    x = torch.randn(2, 3, 8, 8)
    raw = gc.conv(x)
    expected = raw[:, :5] * torch.sigmoid(raw[:, 5:])
    assert torch.equal(gc(x), expected)


def test_gated_conv_zero_gate_blocks_signal():
    gc = GatedConv2d(1, 1, 1)
    with torch.no_grad():
        gc.conv.weight[0].fill_(1.0)     # feature half passes the input
        gc.conv.weight[1].fill_(0.0)     # gate half is driven by bias only
        gc.conv.bias.zero_()
        gc.conv.bias[1] = -30.0          # sigmoid(-30) ~ 0: gate closed
    x = torch.randn(1, 1, 4, 4)
    assert gc(x).abs().max() < 1e-8


def test_gated_residual_block_zero_init_is_identity():
    block = GatedResidualBlock(6)
    with torch.no_grad():
        for p in block.parameters():
            p.zero_()
    x = torch.randn(2, 6, 10, 10)
    assert torch.equal(block(x), x)


def test_gated_residual_block_shape_preserved():
    block = GatedResidualBlock(4)
    x = torch.randn(1, 4, 12, 12)
    assert block(x).shape == x.shape


# ----------------------------------------------------------------------
# spectral normalization

def _largest_singular_value(conv):
    w = conv.weight.detach().reshape(conv.weight.shape[0], -1)
    return torch.linalg.svdvals(w)[0].item()


def test_spectral_norm_converges_to_svd():
    torch.manual_seed(1)
    conv = SpectralConv2d(4, 8, 3, padding=1)
    conv.train()
    x = torch.randn(1, 4, 8, 8)
    for _ in range(50):
        conv(x)
    assert conv.sigma().item() == pytest.approx(_largest_singular_value(conv), rel=1e-4)


def test_spectral_normalized_weight_bounded():
    torch.manual_seed(2)
    conv = SpectralConv2d(3, 6, 4, stride=2, padding=1)
    conv.train()
    x = torch.randn(2, 3, 16, 16)
    for _ in range(20):
        conv(x)
    w_sn = (conv.weight / conv.sigma()).detach().reshape(6, -1)
    top = torch.linalg.svdvals(w_sn)[0].item()
    assert top <= 1.0 + 1e-2


def test_spectral_forward_matches_manual_conv():
    torch.manual_seed(3)
    conv = SpectralConv2d(2, 3, 3, padding=1)
    conv.eval()  # no buffer update: sigma is fixed during the check
    x = torch.randn(1, 2, 6, 6)
    manual = F.conv2d(x, conv.weight / conv.sigma(), conv.bias, padding=1)
    assert torch.allclose(conv(x), manual, atol=1e-7)


def test_spectral_eval_mode_freezes_buffers():
    torch.manual_seed(4)
    conv = SpectralConv2d(2, 2, 3, padding=1)
    conv.train()
    conv(torch.randn(1, 2, 5, 5))
    u0, v0 = conv.u.clone(), conv.v.clone()
    conv.eval()
    conv(torch.randn(1, 2, 5, 5))
    assert torch.equal(conv.u, u0) and torch.equal(conv.v, v0)
    conv.train()
    conv(torch.randn(1, 2, 5, 5))
    assert not torch.equal(conv.u, u0)


def test_spectral_gradient_reaches_raw_weight():
    torch.manual_seed(5)
    conv = SpectralConv2d(2, 2, 3, padding=1)
    conv.train()
    out = conv(torch.randn(1, 2, 5, 5))
    out.sum().backward()
    assert conv.weight.grad is not None
    assert conv.weight.grad.abs().sum() > 0
    assert conv.u.grad is None and conv.v.grad is None


def test_spectral_buffers_persist_in_state_dict():
    conv = SpectralConv2d(1, 1, 3)
    sd = conv.state_dict()
    assert "u" in sd and "v" in sd
