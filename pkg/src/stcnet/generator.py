"""Bidirectional ST-LSTM frame predictor.

A forward stack reads the frames before the target gap and a backward
stack reads the frames after it in reverse order. Both then continue
autoregressively through the gap, and their top-layer hidden states are
fused by a 1x1 convolution into the predicted frames.

Frames enter the stacks through space-to-depth with ``config.patch`` and
leave through its inverse, so recurrence runs at reduced resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .data import PredictionWindow, depth_to_space, space_to_depth, stack_windows
from .numerics import Parameter, Tensor
from .stlstm import DecoupleIncrements, STLSTMParams, init_state, stlstm_step


@dataclass
class GeneratorConfig:
    num_layers: int = 4
    hidden: int = 64
    kernel_size: int = 5
    patch: int = 4
    context: int = 8
    predict: int = 5
    frame_channels: int = 1
    bidirectional: bool = True

    def validate(self, frame_hw=None):
        if self.num_layers < 1 or self.context < 1 or self.predict < 1 or self.hidden < 1:
            raise ValueError(f"invalid generator config {self}")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        if frame_hw is not None and (frame_hw[0] % self.patch or frame_hw[1] % self.patch):
            raise ValueError(f"patch factor {self.patch} does not divide frame size {frame_hw}")

    @property
    def patch_channels(self):
        return self.frame_channels * self.patch * self.patch


class GeneratorParams:
    def __init__(self, config: GeneratorConfig, rng=None, dtype=nx.DEFAULT_DTYPE):
        config.validate()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.config = config
        cp, ch = config.patch_channels, config.hidden

        def stack(prefix):
            return [
                STLSTMParams(cp if l == 0 else ch, ch, config.kernel_size, rng=rng, prefix=f"{prefix}.{l}", dtype=dtype)
                for l in range(config.num_layers)
            ]

        self.forward = stack("gen.fwd")
        self.backward = stack("gen.bwd") if config.bidirectional else []
        bound = 1.0 / np.sqrt(2 * ch)
        self.w_out = Parameter(rng.uniform(-bound, bound, (cp, 2 * ch, 1, 1)).astype(dtype), "gen.w_out")
        self.b_out = Parameter(np.zeros(cp, dtype), "gen.b_out")

    def parameters(self) -> list[Parameter]:
        out = [p for cell in self.forward + self.backward for p in cell.parameters()]
        return out + [self.w_out, self.b_out]

    @property
    def dtype(self):
        return self.w_out.dtype


@dataclass
class DirectionalRollout:
    hidden: list = field(default_factory=list)  # top-layer H per step
    predictions: list = field(default_factory=list)  # next-frame estimate per step (patch space)
    generated: list = field(default_factory=list)  # the last ``steps_to_generate`` predictions
    increments: list = field(default_factory=list)  # [step][layer] -> DecoupleIncrements
    m_in: list = field(default_factory=list)  # [step][layer] -> M fed into the layer
    m_out: list = field(default_factory=list)  # [step][layer] -> M produced by the layer
    c: list = field(default_factory=list)  # [step][layer] -> C


def _decode_half(h: Tensor, params: GeneratorParams, half: int) -> Tensor:
    ch = params.config.hidden
    w = nx.getitem(params.w_out, (slice(None), slice(half * ch, (half + 1) * ch)))
    return nx.conv2d(h, nx.mul(w, 2.0), params.b_out)


def decode_direction(h: Tensor, params: GeneratorParams, direction: str = "forward") -> Tensor:
    """Per-direction frame estimate (patch space) used for self-feeding.

    The fused output equals the mean of the two directional estimates, so
    each estimate is a full-scale frame on its own.
    """
    return _decode_half(h, params, 0 if direction == "forward" else 1)


def fuse_hidden(h_forward: Tensor, h_backward: Tensor | None, params: GeneratorParams, to_frame=True) -> Tensor:
    """Concatenate hidden states, 1x1 convolve to frame channels, undo space-to-depth."""
    if h_backward is None:
        out = _decode_half(h_forward, params, 0)
    else:
        if h_forward.shape != h_backward.shape:
            raise nx.ShapeError(f"fuse_hidden: shape mismatch {h_forward.shape} vs {h_backward.shape}")
        out = nx.conv2d(nx.concat([h_forward, h_backward], axis=1), params.w_out, params.b_out)
    return depth_to_space(out, params.config.patch) if to_frame else out


def directional_rollout(frames, teacher_mask, steps_to_generate: int, cells: list[STLSTMParams],
                        decode) -> DirectionalRollout:
    """Run one stack over ``frames`` (patch space, each [B, Cp, h, w]) then generate.

    ``teacher_mask[s]`` chooses the true frame (True) or the stack's own
    previous prediction (False) as input at step ``s``. It may be a flat
    boolean sequence or a [B, steps] array for per-sample choices. Steps
    beyond the supplied frames must be False.
    """
    n = len(frames)
    if n == 0:
        raise ValueError("directional_rollout: no input frames")
    total = n + max(steps_to_generate - 1, 0)
    mask = np.asarray(teacher_mask, dtype=bool)
    if mask.shape[-1] != total:
        raise ValueError(f"directional_rollout: mask covers {mask.shape[-1]} steps, rollout has {total}")
    step_any = mask if mask.ndim == 1 else mask.any(axis=0)
    step_all = mask if mask.ndim == 1 else mask.all(axis=0)
    if not step_all[0]:
        raise ValueError("directional_rollout: first step must read a true frame")
    if np.any(step_any[n:]):
        raise ValueError("directional_rollout: generation steps cannot read true frames")

    frames = [nx.as_tensor(f) for f in frames]
    b, _, hh, ww = frames[0].shape
    dtype = frames[0].dtype
    ch = cells[0].hidden
    states = [init_state(b, ch, hh, ww, dtype) for _ in cells]
    zig = states[0].m
    out = DirectionalRollout()
    prev_pred = None
    for s in range(total):
        if s < n and step_all[s]:
            x = frames[s]
        elif not step_any[s]:
            x = prev_pred
        else:
            sel = mask[:, s].astype(dtype).reshape(b, 1, 1, 1)
            x = frames[s] * sel + prev_pred * (1.0 - sel)
        m = zig
        incs, mins, mouts, cs = [], [], [], []
        for l, cell in enumerate(cells):
            mins.append(m)
            st, inc = stlstm_step(x, states[l].h, states[l].c, m, cell)
            states[l] = st
            m = st.m
            x = st.h
            incs.append(inc)
            mouts.append(m)
            cs.append(st.c)
        zig = m
        prev_pred = decode(x)
        out.hidden.append(x)
        out.predictions.append(prev_pred)
        out.increments.append(incs)
        out.m_in.append(mins)
        out.m_out.append(mouts)
        out.c.append(cs)
    if steps_to_generate > 0:
        out.generated = out.predictions[n - 1 :]
    return out


def default_mask(config: GeneratorConfig) -> np.ndarray:
    """Teacher forcing on the context, self-feeding through the target gap."""
    total = config.context + config.predict - 1
    mask = np.zeros(total, dtype=bool)
    mask[: config.context] = True
    return mask


@dataclass
class WindowPrediction:
    frames: Tensor  # [B, p, C, H, W]
    increments: list  # flat list of DecoupleIncrements over (direction, step, layer)
    forward: DirectionalRollout
    backward: DirectionalRollout | None


def predict_window(params: GeneratorParams, before, after, masks=None) -> WindowPrediction:
    """Predict the p frames between ``before`` (F) and ``after`` (B).

    ``before`` / ``after``: arrays [B, i, C, H, W]. ``masks`` is an optional
    (forward_mask, backward_mask) pair as accepted by ``directional_rollout``.
    The true target frames are never an input.
    """
    cfg = params.config
    before = np.asarray(before, dtype=params.dtype)
    after = np.asarray(after, dtype=params.dtype)
    if before.ndim != 5 or before.shape[1] != cfg.context:
        raise ValueError(f"predict_window: expected [B, {cfg.context}, C, H, W] context, got {before.shape}")
    if cfg.bidirectional and after.shape != before.shape:
        raise ValueError(f"predict_window: after-context {after.shape} does not match {before.shape}")
    cfg.validate(before.shape[-2:])
    p = cfg.predict
    if masks is None:
        masks = (default_mask(cfg), default_mask(cfg))

    fwd_frames = [Tensor(f) for f in space_to_depth(before, cfg.patch).transpose(1, 0, 2, 3, 4)]
    fwd = directional_rollout(fwd_frames, masks[0], p, params.forward,
                              lambda h: decode_direction(h, params, "forward"))
    bwd = None
    if cfg.bidirectional:
        rev = space_to_depth(after, cfg.patch)[:, ::-1].transpose(1, 0, 2, 3, 4)
        bwd = directional_rollout([Tensor(np.ascontiguousarray(f)) for f in rev], masks[1], p, params.backward,
                                  lambda h: decode_direction(h, params, "backward"))

    i = cfg.context
    outs = []
    for k in range(p):
        hf = fwd.hidden[i - 1 + k]
        hb = bwd.hidden[i - 1 + (p - 1 - k)] if bwd is not None else None
        outs.append(fuse_hidden(hf, hb, params))
    frames = nx.stack(outs, axis=1)
    incs = [inc for step in fwd.increments for inc in step]
    if bwd is not None:
        incs += [inc for step in bwd.increments for inc in step]
    return WindowPrediction(frames, incs, fwd, bwd)


def predict_windows(params: GeneratorParams, windows: list[PredictionWindow], masks=None) -> WindowPrediction:
    before, _, after = stack_windows(windows)
    return predict_window(params, before, after, masks)


def reverse_scheduled_mask(iteration: int, start_prob: float, end_prob: float, ramp_iters: int,
                           rng: np.random.Generator, config: GeneratorConfig, batch: int | None = None) -> np.ndarray:
    """Training mask: true-frame probability ramps linearly over the context steps.

    Step 0 always reads a true frame and target steps are always self-fed.
    Returns [steps] booleans, or [batch, steps] when ``batch`` is given.
    """
    for q in (start_prob, end_prob):
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"probability {q} outside [0, 1]")
    if ramp_iters <= 0 or iteration >= ramp_iters:
        prob = end_prob
    else:
        prob = start_prob + (end_prob - start_prob) * iteration / ramp_iters
    total = config.context + config.predict - 1
    shape = (total,) if batch is None else (batch, total)
    mask = np.zeros(shape, dtype=bool)
    ctx = mask[..., : config.context]
    ctx[...] = rng.random(ctx.shape) < prob
    mask[..., 0] = True
    return mask

