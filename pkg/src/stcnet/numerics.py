"""Small reverse-mode differentiation engine over numpy arrays.

Every model primitive (convolution, gates, losses) is a function that
builds a node in a dynamic graph. ``backward`` walks the graph in reverse
topological order and accumulates gradients into every reachable
``Parameter``. ``finite_diff_gradient`` is the independent oracle used by
the gradient-check tests.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels

DEFAULT_DTYPE = np.float32

_grad_enabled = True


class ShapeError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference, detached targets)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A node in the computation graph.

    ``data`` is always a numpy array. ``grad`` stays ``None`` until a
    backward pass reaches the node.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        backprop(self, grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


class Parameter(Tensor):
    """A trainable leaf with a stable identifier."""

    __slots__ = ()

    def __init__(self, data, name, dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if dtype is None and np.isscalar(x):
        # scalars adopt the dtype of the other operand at the call site
        return Tensor(np.asarray(x, dtype=np.float64))
    return Tensor(x, dtype=dtype)


def _make(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _scalar_operand(x, like: Tensor):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _scalar_operand(a, b)
    b = b if isinstance(b, Tensor) else _scalar_operand(b, a)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _scalar_operand(a, b)
    b = b if isinstance(b, Tensor) else _scalar_operand(b, a)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _scalar_operand(a, b)
    b = b if isinstance(b, Tensor) else _scalar_operand(b, a)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a = a if isinstance(a, Tensor) else _scalar_operand(a, b)
    b = b if isinstance(b, Tensor) else _scalar_operand(b, a)

    def bw(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _make(a.data / b.data, (a, b), bw)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two equally shaped tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return mul(a, b)


def sigmoid(x: Tensor) -> Tensor:
    # tanh form is overflow-free
    out = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def bw(g):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), bw)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - out * out),)

    return _make(out, (x,), bw)


def activation(kind: str, x: Tensor) -> Tensor:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    raise ValueError(f"unknown activation {kind!r}")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    d = x.data
    scale = np.where(d > 0, 1.0, slope).astype(d.dtype)

    def bw(g):
        return (g * scale,)

    return _make(d * scale, (x,), bw)


def absolute(x: Tensor) -> Tensor:
    def bw(g):
        return (g * np.sign(x.data),)

    return _make(np.abs(x.data), (x,), bw)


def square(x: Tensor) -> Tensor:
    def bw(g):
        return (2.0 * g * x.data,)

    return _make(x.data * x.data, (x,), bw)


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)

    def bw(g):
        return (g * 0.5 / out,)

    return _make(out, (x,), bw)


# ---------------------------------------------------------------- reductions


def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _make(np.asarray(out), (x,), bw)


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        n = int(np.prod([x.shape[a] for a in axes]))
    return mul(tsum(x, axis, keepdims), 1.0 / n)


# ---------------------------------------------------------------- structure


def reshape(x: Tensor, shape) -> Tensor:
    def bw(g):
        return (g.reshape(x.shape),)

    return _make(x.data.reshape(shape), (x,), bw)


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)

    def bw(g):
        return (g.transpose(inv),)

    return _make(x.data.transpose(axes), (x,), bw)


def getitem(x: Tensor, idx) -> Tensor:
    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g) if _has_advanced(idx) else _slice_add(full, idx, g)
        return (full,)

    return _make(x.data[idx], (x,), bw)


def _has_advanced(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def _slice_add(full, idx, g):
    full[idx] += g


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != axis % len(ref)
        ):
            raise ShapeError(f"concat: incompatible shapes {ref} and {t.shape} on axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    return concat([a, b], axis=1)


def split(x: Tensor, n: int, axis: int = 1) -> list[Tensor]:
    """Split into ``n`` equal chunks along ``axis``."""
    size = x.shape[axis]
    if size % n:
        raise ShapeError(f"split: axis {axis} of size {size} not divisible by {n}")
    step = size // n
    out = []
    for k in range(n):
        idx = [slice(None)] * x.ndim
        idx[axis] = slice(k * step, (k + 1) * step)
        out.append(getitem(x, tuple(idx)))
    return out


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


# ---------------------------------------------------------------- convolution


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    x: [B, Cin, H, W], w: [Cout, Cin, k, k], optional bias b: [Cout].
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-D input and kernel, got {x.shape} and {w.shape}")
    B, C, H, W = x.shape
    cout, cin, kh, kw = w.shape
    if cin != C or kh != kw:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    k = kh
    Hp, Wp = H + 2 * padding, W + 2 * padding
    if Hp < k or Wp < k:
        raise ShapeError(f"conv2d: kernel {w.shape} larger than padded input {x.shape}")
    Ho = (Hp - k) // stride + 1
    Wo = (Wp - k) // stride + 1

    if k == 1 and stride == 1 and padding == 0:
        # pointwise: plain channel mixing as a batched matmul
        wm = w.data.reshape(cout, cin)
        xf = x.data.reshape(B, C, H * W)
        out = (wm @ xf).reshape(B, cout, H, W)
        if b is not None:
            out = out + b.data.reshape(1, -1, 1, 1)

        def bw_pointwise(g):
            gf = g.reshape(B, cout, H * W)
            gx = (wm.T @ gf).reshape(x.shape) if x.requires_grad else None
            gw = (gf @ xf.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape) if w.requires_grad else None
            if b is None:
                return gx, gw
            return gx, gw, g.sum(axis=(0, 2, 3))

        parents = (x, w) if b is None else (x, w, b)
        return _make(out, parents, bw_pointwise)

    cols = _kernels.im2col(np.ascontiguousarray(x.data), k, stride, padding, Ho, Wo)
    wm = w.data.reshape(cout, -1)
    out = (wm @ cols).reshape(cout, B, Ho, Wo).transpose(1, 0, 2, 3)
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)

    def bw(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(cout, B * Ho * Wo)
        gw = (gt @ cols.T).reshape(w.shape) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gx = _kernels.col2im(np.ascontiguousarray(wm.T @ gt), B, C, H, W, k, stride, padding, Ho, Wo)
        if b is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    parents = (x, w) if b is None else (x, w, b)
    return _make(out, parents, bw)


# ---------------------------------------------------------------- losses


def mse_mean(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_mean: shape mismatch {pred.shape} vs {target.shape}")
    return mean(square(sub(pred, target)))


def abs_diff_l1(a: Tensor, b) -> Tensor:
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"abs_diff_l1: shape mismatch {a.shape} vs {b.shape}")
    return tsum(absolute(sub(a, b)))


# ---------------------------------------------------------------- backward


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backprop(loss: Tensor, grad=None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    Intermediate gradients are released as soon as they have been
    propagated; leaf gradients add to whatever is already stored.
    """
    if grad is None:
        if loss.data.size != 1:
            raise ShapeError(f"backprop: loss must be scalar, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    grads = {id(loss): np.asarray(grad, dtype=loss.dtype)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# ---------------------------------------------------------------- optimizer


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def clip_grad_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    def __init__(self, params: Sequence[Parameter], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("Adam: parameter identifiers must be unique")
        self.state = OptimizerState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for p in self.params:
            self.state.m[p.name] = np.zeros_like(p.data)
            self.state.v[p.name] = np.zeros_like(p.data)

    def zero_grad(self):
        zero_grad(self.params)

    def step(self):
        adam_step(self.state, self.params)


def adam_step(state: OptimizerState, params: Sequence[Parameter]) -> None:
    """Bias-corrected adaptive-moment update, in place on ``params``."""
    for p in params:
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(f"non-finite gradient in parameter {p.name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.data.dtype)


# ---------------------------------------------------------------- oracle


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (float64)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def gradcheck(
    build_loss: Callable[[], Tensor],
    params: Sequence[Parameter],
    h: float = 1e-6,
    max_elems: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between backprop and central differences.

    ``build_loss`` must rebuild the graph from the current parameter
    values each call. When ``max_elems`` is set, a random subset of each
    parameter's entries is checked.
    """
    zero_grad(params)
    loss = build_loss()
    backprop(loss)
    analytic = {p.name: p.grad.copy() for p in params}
    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for p in params:
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_elems is not None and flat.size > max_elems:
            idx = rng.choice(flat.size, size=max_elems, replace=False)
        a = analytic[p.name].reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(build_loss().data)
            flat[i] = orig - h
            fm = float(build_loss().data)
            flat[i] = orig
            num = (fp - fm) / (2.0 * h)
            denom = max(abs(num), abs(a[i]), 1e-4)
            worst = max(worst, abs(num - a[i]) / denom)
    return worst
