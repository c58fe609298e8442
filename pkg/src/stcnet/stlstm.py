"""Spatiotemporal LSTM unit with a temporal memory C and a zigzag memory M.

The gate kernels are stored stacked so one convolution per input source
computes all gate pre-activations:

    w_x : [7*ch, cin, k, k]  gates on x_t       (i, f, g, i', f', g', o)
    w_h : [4*ch, ch,  k, k]  gates on H_{t-1}   (i, f, g, o)
    w_m : [3*ch, ch,  k, k]  gates on M^{l-1}   (i', f', g')
    w_cm: [ch, 2*ch,  k, k]  output-gate terms on the new [C, M]
    w_fuse: [ch, 2*ch, 1, 1] hidden-state fusion of [C, M]
    w_dec : [ch, ch, 1, 1]   shared projection of the memory increments
    bias  : [7*ch]           (b_i, b_f, b_g, b'_i, b'_f, b'_g, b_o)

``STLSTMParams.kernel(name)`` returns a writable view of one named block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import Parameter, Tensor

X_GATES = ("i", "f", "g", "i'", "f'", "g'", "o")
H_GATES = ("i", "f", "g", "o")
M_GATES = ("i'", "f'", "g'")

# named kernel -> (stacked array, block index along output channels)
_KERNEL_MAP = {
    "xi": ("w_x", 0), "xf": ("w_x", 1), "xg": ("w_x", 2),
    "xi'": ("w_x", 3), "xf'": ("w_x", 4), "xg'": ("w_x", 5), "xo": ("w_x", 6),
    "hi": ("w_h", 0), "hf": ("w_h", 1), "hg": ("w_h", 2), "ho": ("w_h", 3),
    "mi'": ("w_m", 0), "mf'": ("w_m", 1), "mg": ("w_m", 2),
}
_BIAS_MAP = {"i": 0, "f": 1, "g": 2, "i'": 3, "f'": 4, "g'": 5, "o": 6}


@dataclass
class STLSTMState:
    h: Tensor
    c: Tensor
    m: Tensor


@dataclass
class DecoupleIncrements:
    dc: Tensor
    dm: Tensor


class STLSTMParams:
    def __init__(self, in_channels, hidden, kernel_size=5, rng=None, prefix="cell", dtype=nx.DEFAULT_DTYPE,
                 forget_bias=1.0):
        if kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        self.hidden = hidden
        self.kernel_size = k = kernel_size
        ch = hidden

        def init(shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape).astype(dtype)

        self.w_x = Parameter(init((7 * ch, in_channels, k, k), in_channels * k * k), f"{prefix}.w_x")
        self.w_h = Parameter(init((4 * ch, ch, k, k), ch * k * k), f"{prefix}.w_h")
        self.w_m = Parameter(init((3 * ch, ch, k, k), ch * k * k), f"{prefix}.w_m")
        self.w_cm = Parameter(init((ch, 2 * ch, k, k), 2 * ch * k * k), f"{prefix}.w_cm")
        self.w_fuse = Parameter(init((ch, 2 * ch, 1, 1), 2 * ch), f"{prefix}.w_fuse")
        self.w_dec = Parameter(init((ch, ch, 1, 1), ch), f"{prefix}.w_dec")
        bias = np.zeros(7 * ch, dtype=dtype)
        bias[ch : 2 * ch] = forget_bias
        bias[4 * ch : 5 * ch] = forget_bias
        self.bias = Parameter(bias, f"{prefix}.bias")

    def parameters(self) -> list[Parameter]:
        return [self.w_x, self.w_h, self.w_m, self.w_cm, self.w_fuse, self.w_dec, self.bias]

    def kernel(self, name: str) -> np.ndarray:
        """Writable view of a single named kernel, e.g. ``"xi"``, ``"mg"``, ``"co"``."""
        ch = self.hidden
        if name in _KERNEL_MAP:
            attr, block = _KERNEL_MAP[name]
            return getattr(self, attr).data[block * ch : (block + 1) * ch]
        if name == "co":
            return self.w_cm.data[:, :ch]
        if name == "mo":
            return self.w_cm.data[:, ch:]
        if name == "1x1":
            return self.w_fuse.data
        if name == "c":
            return self.w_dec.data
        raise KeyError(name)

    def bias_of(self, gate: str) -> np.ndarray:
        ch = self.hidden
        b = _BIAS_MAP[gate]
        return self.bias.data[b * ch : (b + 1) * ch]


def init_state(batch, channels, height, width, dtype=nx.DEFAULT_DTYPE) -> STLSTMState:
    if min(batch, channels, height, width) <= 0:
        raise ValueError("init_state: dimensions must be positive")
    shape = (batch, channels, height, width)
    return STLSTMState(
        Tensor(np.zeros(shape, dtype)), Tensor(np.zeros(shape, dtype)), Tensor(np.zeros(shape, dtype))
    )


def stlstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, m_in: Tensor, params: STLSTMParams):
    """One update of the cell. Returns ``(STLSTMState, DecoupleIncrements)``."""
    if not (x.shape[0] == h_prev.shape[0] == m_in.shape[0]) or not (
        x.shape[2:] == h_prev.shape[2:] == m_in.shape[2:] == c_prev.shape[2:]
    ):
        raise nx.ShapeError(
            f"stlstm_step: x {x.shape}, h {h_prev.shape}, c {c_prev.shape}, m {m_in.shape} disagree"
        )
    if h_prev.shape != c_prev.shape or h_prev.shape != m_in.shape:
        raise nx.ShapeError(f"stlstm_step: state shapes differ: {h_prev.shape}, {c_prev.shape}, {m_in.shape}")
    pad = params.kernel_size // 2

    xb = nx.conv2d(x, params.w_x, params.bias, padding=pad)
    hc = nx.conv2d(h_prev, params.w_h, padding=pad)
    mc = nx.conv2d(m_in, params.w_m, padding=pad)
    i_x, f_x, g_x, ip_x, fp_x, gp_x, o_x = nx.split(xb, 7)
    i_h, f_h, g_h, o_h = nx.split(hc, 4)
    ip_m, fp_m, gp_m = nx.split(mc, 3)

    i_t = nx.sigmoid(i_x + i_h)
    f_t = nx.sigmoid(f_x + f_h)
    g_t = nx.tanh(g_x + g_h)
    delta_c = i_t * g_t
    c = f_t * c_prev + delta_c

    ip_t = nx.sigmoid(ip_x + ip_m)
    fp_t = nx.sigmoid(fp_x + fp_m)
    gp_t = nx.tanh(gp_x + gp_m)
    delta_m = ip_t * gp_t
    m = fp_t * m_in + delta_m

    cm = nx.concat([c, m], axis=1)
    o_t = nx.sigmoid(o_x + o_h + nx.conv2d(cm, params.w_cm, padding=pad))
    h = o_t * nx.tanh(nx.conv2d(cm, params.w_fuse))

    inc = DecoupleIncrements(nx.conv2d(delta_c, params.w_dec), nx.conv2d(delta_m, params.w_dec))
    return STLSTMState(h, c, m), inc
