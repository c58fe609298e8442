"""Generator constraints and total objectives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numerics as nx
from .discriminator import lsgan_d_loss
from .numerics import Tensor
from .stlstm import DecoupleIncrements

NORM_FLOOR = 1e-12


@dataclass
class LossWeights:
    intensity: float = 1.0
    gradient: float = 1.0
    adversarial: float = 0.05
    decouple: float = 1.0

    def __post_init__(self):
        for name in ("intensity", "gradient", "adversarial", "decouple"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"loss weight {name} must be finite and non-negative, got {v}")


@dataclass
class LossBundle:
    intensity: float
    gradient: float
    adversarial_g: float
    decouple: float
    total_g: float
    total_d: float = float("nan")

    def as_row(self):
        return [self.intensity, self.gradient, self.adversarial_g, self.decouple, self.total_g, self.total_d]


def intensity_loss(pred, target) -> Tensor:
    """Mean squared error over every frame and pixel."""
    return nx.mse_mean(nx.as_tensor(pred), target)


def _frame_gradients(x: Tensor):
    # one-pixel backward differences along rows (vertical) and columns (horizontal)
    h, w = x.shape[-2:]
    lead = (slice(None),) * (x.ndim - 2)
    dv = nx.absolute(nx.getitem(x, lead + (slice(1, h), slice(None))) - nx.getitem(x, lead + (slice(0, h - 1), slice(None))))
    dh = nx.absolute(nx.getitem(x, lead + (slice(None), slice(1, w))) - nx.getitem(x, lead + (slice(None), slice(0, w - 1))))
    return dv, dh


def gradient_loss(pred, target, normalize: bool = True) -> Tensor:
    """Sharpness constraint on absolute image gradients.

    Sums the L1 mismatch of vertical and horizontal absolute differences
    over pixels and over the frames of a sequence. With ``normalize`` the
    per-frame sum is divided by the frame's pixel count. Leading axes other
    than the frame axis (e.g. batch) are averaged.

    pred / target: [..., p, C, H, W] or a single [C, H, W] / [H, W] frame.
    """
    pred, target = nx.as_tensor(pred), nx.as_tensor(target)
    if pred.shape != target.shape:
        raise nx.ShapeError(f"gradient_loss: shape mismatch {pred.shape} vs {target.shape}")
    h, w = pred.shape[-2:]
    if h < 2 or w < 2:
        raise ValueError(f"gradient_loss: frames must be at least 2x2, got {h}x{w}")
    pv, ph = _frame_gradients(pred)
    tv, th = _frame_gradients(target.detach())
    total = nx.tsum(nx.absolute(pv - tv)) + nx.tsum(nx.absolute(ph - th))
    # frames are [..., p, C, H, W]; average over everything ahead of the frame axis
    outer = int(np.prod(pred.shape[:-4])) if pred.ndim >= 5 else 1
    scale = 1.0 / outer
    if normalize:
        scale /= h * w
    return nx.mul(total, scale)


def decouple_loss(increments: Sequence[DecoupleIncrements], diagnostics: dict | None = None) -> Tensor:
    """Sum over (step, layer) of |cos(dC, dM)|, each flattened per sample and batch-averaged.

    Terms where either norm is below 1e-12 contribute zero; their count is
    stored in ``diagnostics["guarded"]`` when a dict is supplied.
    """
    if not increments:
        raise ValueError("decouple_loss: no increments")
    terms = []
    guarded = 0
    for inc in increments:
        if inc.dc.shape != inc.dm.shape:
            raise nx.ShapeError(f"decouple_loss: increment shapes differ {inc.dc.shape} vs {inc.dm.shape}")
        b = inc.dc.shape[0]
        dc = nx.reshape(inc.dc, (b, -1))
        dm = nx.reshape(inc.dm, (b, -1))
        dot = nx.tsum(dc * dm, axis=1)
        sc = nx.tsum(nx.square(dc), axis=1)
        sm = nx.tsum(nx.square(dm), axis=1)
        ok = (np.sqrt(sc.data) >= NORM_FLOOR) & (np.sqrt(sm.data) >= NORM_FLOOR)
        guarded += int(np.sum(~ok))
        if not ok.any():
            continue
        if not ok.all():
            # safe denominators for guarded samples; their terms are zeroed below
            safe = np.where(ok, 0.0, 1.0).astype(dc.dtype)
            sc = sc + safe
            sm = sm + safe
        nc, nm = nx.sqrt(sc), nx.sqrt(sm)
        cos = nx.absolute(nx.div(dot, nc * nm))
        terms.append(nx.mul(nx.tsum(cos * ok.astype(dc.dtype)), 1.0 / b))
    if diagnostics is not None:
        diagnostics["guarded"] = guarded
        diagnostics["terms"] = len(increments)
    if not terms:
        return nx.Tensor(np.zeros((), dtype=increments[0].dc.dtype))
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def generator_total_loss(intensity, gradient, adversarial, decouple, weights: LossWeights):
    """Weighted sum of the four generator terms; works on Tensors or floats."""
    parts = [
        (weights.intensity, intensity),
        (weights.gradient, gradient),
        (weights.adversarial, adversarial),
        (weights.decouple, decouple),
    ]
    if not any(isinstance(v, Tensor) for _, v in parts):
        return float(sum(w * float(v) for w, v in parts))
    total = None
    for w, v in parts:
        if w == 0.0 or v is None:
            continue
        term = nx.mul(nx.as_tensor(v), float(w))
        total = term if total is None else total + term
    if total is None:
        return nx.Tensor(np.zeros((), dtype=np.float64))
    return total


def discriminator_total_loss(real_grid, fake_grid) -> Tensor:
    """Discriminator objective; ``fake_grid`` must come from detached predictions."""
    return lsgan_d_loss(real_grid, fake_grid)
