"""Patch discriminator and least-squares adversarial objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Parameter, Tensor


@dataclass
class DiscriminatorConfig:
    channels: tuple = (64, 128, 256, 1)
    kernel_size: int = 4
    stride: int = 2
    padding: int = 1
    slope: float = 0.2
    sequence_length: int = 5
    frame_channels: int = 1


class DiscriminatorParams:
    def __init__(self, config: DiscriminatorConfig, rng=None, dtype=nx.DEFAULT_DTYPE):
        if config.channels[-1] != 1:
            raise ValueError("final discriminator layer must output one channel")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        cin = config.sequence_length * config.frame_channels
        k = config.kernel_size
        for n, cout in enumerate(config.channels):
            bound = 1.0 / np.sqrt(cin * k * k)
            self.weights.append(Parameter(rng.uniform(-bound, bound, (cout, cin, k, k)).astype(dtype), f"disc.w{n}"))
            self.biases.append(Parameter(np.zeros(cout, dtype), f"disc.b{n}"))
            cin = cout

    def parameters(self) -> list[Parameter]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def discriminate(seq, params: DiscriminatorParams) -> Tensor:
    """Score a [B, p, C, H, W] sequence; returns a [B, 1, Hp, Wp] patch grid."""
    cfg = params.config
    seq = nx.as_tensor(seq)
    if seq.ndim != 5 or seq.shape[1] != cfg.sequence_length:
        raise ValueError(f"discriminate: expected {cfg.sequence_length} frames per sequence, got shape {seq.shape}")
    b, p, c, h, w = seq.shape
    x = nx.reshape(seq, (b, p * c, h, w))
    last = len(params.weights) - 1
    for n, (wk, bk) in enumerate(zip(params.weights, params.biases)):
        x = nx.conv2d(x, wk, bk, stride=cfg.stride, padding=cfg.padding)
        if n < last:
            x = nx.leaky_relu(x, cfg.slope)
    return x


def _check_grids(a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise nx.ShapeError(f"patch grids differ: {a.shape} vs {b.shape}")


def lsgan_d_loss(real_grid, fake_grid) -> Tensor:
    """Mean over patches of 1/2 (D(P) - 1)^2 plus mean of 1/2 D(P_hat)^2."""
    real_grid, fake_grid = nx.as_tensor(real_grid), nx.as_tensor(fake_grid)
    _check_grids(real_grid, fake_grid)
    return nx.mul(nx.mse_mean(real_grid, np.ones(real_grid.shape, real_grid.dtype)), 0.5) + nx.mul(
        nx.mse_mean(fake_grid, np.zeros(fake_grid.shape, fake_grid.dtype)), 0.5
    )


def lsgan_g_loss(fake_grid) -> Tensor:
    """Mean over patches of 1/2 (D(P_hat) - 1)^2."""
    fake_grid = nx.as_tensor(fake_grid)
    return nx.mul(nx.mse_mean(fake_grid, np.ones(fake_grid.shape, fake_grid.dtype)), 0.5)
