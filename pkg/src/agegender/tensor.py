"""Dense float64 tensors with tape-based reverse-mode differentiation.

Ops record onto the active :class:`Tape` (a context manager). Without an
active tape they only compute values, which doubles as the inference fast
path. Storage is row-major float64 throughout and structural ops
(reshape, transpose, concat, narrow) copy instead of aliasing: correctness
over speed at desk scale.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from .errors import DimensionError, NumericalError, TapeError

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)

_ACTIVE_TAPE = None


class Tensor:
    """N-dimensional float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise DimensionError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; all real work happens in the module-level ops
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(data):
    """An untracked tensor (inputs, targets, fixed masks)."""
    return Tensor(data, requires_grad=False)


def parameter(data):
    """A tracked leaf tensor."""
    return Tensor(data, requires_grad=True)


class _Node:
    __slots__ = ("inputs", "output", "backward")

    def __init__(self, inputs, output, backward):
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Records ops in execution order; replays them in reverse on backward.

    One logical thread per tape. A tape can run backward exactly once;
    call :meth:`reset` (or build a fresh tape) before reusing it.
    """

    def __init__(self):
        self._nodes = []
        self._used = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise TapeError("tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def __len__(self):
        return len(self._nodes)

    def reset(self):
        self._nodes.clear()
        self._used = False

    def backward(self, loss):
        if not isinstance(loss, Tensor) or loss.size != 1:
            got = loss.shape if isinstance(loss, Tensor) else type(loss)
            raise TapeError(f"backward needs a scalar loss, got {got}")
        if self._used:
            raise TapeError("tape already consumed; reset() before calling backward again")
        if not self._nodes:
            raise TapeError("cannot run backward over an empty tape")
        self._used = True
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            out_grad = node.output.grad
            if out_grad is None:
                continue
            grads = node.backward(out_grad)
            for t, g in zip(node.inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                t.grad = g if t.grad is None else t.grad + g


def _emit(data, inputs, backward):
    out = Tensor.__new__(Tensor)
    out.data = data if data.dtype == np.float64 else data.astype(np.float64)
    out.requires_grad = False
    out.grad = None
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape._nodes.append(_Node(tuple(inputs), out, backward))
    return out


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise


def add(a, b):
    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _emit(a.data + b.data, (a, b), backward)


def sub(a, b):
    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return _emit(a.data - b.data, (a, b), backward)


def mul(a, b):
    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _emit(a.data * b.data, (a, b), backward)


def scale(a, s):
    s = float(s)

    def backward(g):
        return (g * s,)

    return _emit(a.data * s, (a,), backward)


def gelu(a):
    """Exact (erf-based) GELU."""
    e = _erf(a.data * _INV_SQRT2)

    def backward(g):
        d = 0.5 * (1.0 + e) + a.data * np.exp(-0.5 * a.data * a.data) * _INV_SQRT2PI
        return (g * d,)

    return _emit(0.5 * a.data * (1.0 + e), (a,), backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError as exc:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from exc

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return (ga, gb)

    return _emit(data, (a, b), backward)


# ---------------------------------------------------------------------------
# structure


def reshape(a, shape):
    try:
        data = a.data.reshape(shape).copy()
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {a.shape} to {shape}") from exc

    def backward(g):
        return (g.reshape(a.shape),)

    return _emit(data, (a,), backward)


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise DimensionError(f"bad transpose axes {axes} for shape {a.shape}")
    inverse = np.argsort(axes)

    def backward(g):
        return (np.transpose(g, inverse),)

    return _emit(np.transpose(a.data, axes).copy(), (a,), backward)


def concat(tensors, axis):
    tensors = list(tensors)
    if not tensors:
        raise DimensionError("concat of zero tensors")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from exc
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, tensors))

    return _emit(data, tuple(tensors), backward)


def narrow(a, axis, start, length):
    """Copy-slice `length` entries along `axis` starting at `start`."""
    if not (0 <= start and start + length <= a.shape[axis]):
        raise DimensionError(f"narrow [{start}:{start + length}] out of range for shape {a.shape} axis {axis}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        full = np.zeros(a.shape)
        full[index] = g
        return (full,)

    return _emit(a.data[index].copy(), (a,), backward)


# ---------------------------------------------------------------------------
# reductions


def tsum(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)
    if np.isscalar(data) or data.ndim == 0:
        data = np.asarray(data)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        axes = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _emit(data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= a.shape[ax]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------------------
# normalized maps


def softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return _emit(s, (a,), backward)


def log_softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _emit(out, (a,), backward)


def layer_norm(x, gamma, beta, eps=1e-6):
    """Zero mean / unit variance over the last axis, then affine."""
    width = x.shape[-1]
    if gamma.shape != (width,) or beta.shape != (width,):
        raise DimensionError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must match last axis ({width},)"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        gx = ggamma = gbeta = None
        lead = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            ggamma = (g * xhat).sum(axis=lead)
        if beta.requires_grad:
            gbeta = g.sum(axis=lead)
        if x.requires_grad:
            dxh = g * gamma.data
            gx = inv * (
                dxh
                - dxh.mean(axis=-1, keepdims=True)
                - xhat * (dxh * xhat).mean(axis=-1, keepdims=True)
            )
        return (gx, ggamma, gbeta)

    return _emit(xhat * gamma.data + beta.data, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# local windows (outlook attention, patch extraction)


def _window_geometry(h, w, k, stride, pad):
    if k < 1 or stride < 1 or pad < 0:
        raise DimensionError(f"bad window geometry k={k} stride={stride} pad={pad}")
    hp, wp = h + 2 * pad, w + 2 * pad
    if k > hp or k > wp or (hp - k) % stride or (wp - k) % stride:
        raise DimensionError(
            f"window k={k} stride={stride} pad={pad} does not tile a {h}x{w} input"
        )
    return (hp - k) // stride + 1, (wp - k) // stride + 1


def _gather_windows(xp, k, stride, nh, nw):
    # xp: [B, hp, wp, C] -> [B, L, k*k, C]; one strided slice per offset
    b, _, _, c = xp.shape
    out = np.empty((b, nh, nw, k * k, c))
    t = 0
    for di in range(k):
        for dj in range(k):
            out[:, :, :, t, :] = xp[:, di:di + stride * nh:stride, dj:dj + stride * nw:stride, :]
            t += 1
    return out.reshape(b, nh * nw, k * k, c)


def _scatter_windows(g, hp, wp, k, stride, nh, nw):
    # g: [B, L, k*k, C] -> [B, hp, wp, C], summing overlaps
    b, _, kk, c = g.shape
    blocks = g.reshape(b, nh, nw, kk, c)
    acc = np.zeros((b, hp, wp, c))
    t = 0
    for di in range(k):
        for dj in range(k):
            acc[:, di:di + stride * nh:stride, dj:dj + stride * nw:stride, :] += blocks[:, :, :, t, :]
            t += 1
    return acc


def unfold(x, k, stride=1, pad=0):
    """[B, H, W, C] -> [B, L, k*k, C] local window columns."""
    if x.ndim != 4:
        raise DimensionError(f"unfold expects [B, H, W, C], got {x.shape}")
    b, h, w, c = x.shape
    nh, nw = _window_geometry(h, w, k, stride, pad)
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    hp, wp = h + 2 * pad, w + 2 * pad

    def backward(g):
        full = _scatter_windows(g, hp, wp, k, stride, nh, nw)
        if pad:
            full = full[:, pad:hp - pad, pad:wp - pad, :]
        return (full,)

    return _emit(_gather_windows(xp, k, stride, nh, nw), (x,), backward)


def fold(cols, hw, k, stride=1, pad=0):
    """Inverse of unfold: [B, L, k*k, C] -> [B, H, W, C], overlaps summed."""
    if cols.ndim != 4:
        raise DimensionError(f"fold expects [B, L, k*k, C], got {cols.shape}")
    h, w = hw
    nh, nw = _window_geometry(h, w, k, stride, pad)
    b, l, kk, c = cols.shape
    if l != nh * nw or kk != k * k:
        raise DimensionError(f"fold: columns {cols.shape} do not match {h}x{w} k={k} stride={stride} pad={pad}")
    hp, wp = h + 2 * pad, w + 2 * pad
    full = _scatter_windows(cols.data, hp, wp, k, stride, nh, nw)
    if pad:
        full = full[:, pad:hp - pad, pad:wp - pad, :].copy()

    def backward(g):
        gp = np.pad(g, ((0, 0), (pad, pad), (pad, pad), (0, 0))) if pad else g
        return (_gather_windows(gp, k, stride, nh, nw),)

    return _emit(full, (cols,), backward)


def overlap_counts(h, w, k, stride=1, pad=1):
    """How many windows cover each position; fold(unfold(x)) == x * counts."""
    nh, nw = _window_geometry(h, w, k, stride, pad)
    hp, wp = h + 2 * pad, w + 2 * pad
    ones = np.ones((1, nh * nw, k * k, 1))
    counts = _scatter_windows(ones, hp, wp, k, stride, nh, nw)[0, :, :, 0]
    if pad:
        counts = counts[pad:hp - pad, pad:wp - pad].copy()
    return counts


# ---------------------------------------------------------------------------
# debugging


def check_finite(t, what="tensor"):
    """Explicit NaN/Inf check; numerical hygiene is opt-in, not per-op."""
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    if not np.isfinite(data).all():
        bad = int(data.size - np.isfinite(data).sum())
        raise NumericalError(f"{what}: {bad} non-finite value(s)")
    return t
