"""Dense tensors with reverse-mode automatic differentiation.

Define-by-run: every op whose inputs require gradients records a backward
closure on the output node; ``backward`` walks the graph once in reverse
topological order. Storage is float32 by default with float64 accumulation
inside reductions; float64 tensors are supported end to end, which the
finite-difference tests rely on.

No broadcasting beyond bias-add: every shape contract is explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Tensor:
    """N-d float array with optional gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = (
            np.zeros_like(self.data) if self.requires_grad else None
        )
        self._parents: Tuple["Tensor", ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g.astype(self.data.dtype, copy=False).reshape(self.data.shape)

    def backward(self):
        """Reverse accumulation from a scalar output."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: List[Tensor] = []
        seen = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # minimal operator sugar, used mostly by tests
    def __add__(self, other):
        return add(self, other if isinstance(other, Tensor) else Tensor(other, dtype=self.dtype))

    def __mul__(self, other):
        return mul(self, other if isinstance(other, Tensor) else Tensor(other, dtype=self.dtype))


def _wrap(data: np.ndarray, parents: Tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _wrap(a.data + b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _wrap(a.data * b.data, (a, b), bwd)


def tsum(a: Tensor) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g)))

    total = np.array(a.data.sum(dtype=np.float64), dtype=a.data.dtype)
    return _wrap(total, (a,), bwd)


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0  # subgradient at 0 is 0

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * pos)

    return _wrap(x.data * pos, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * out * (1.0 - out))

    return _wrap(out, (x,), bwd)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate (N, C, H, W) tensors along channels."""
    if a.data.ndim != 4 or b.data.ndim != 4:
        raise ValueError("concat_channels expects NCHW tensors")
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise ValueError(f"concat_channels: incompatible {a.data.shape} vs {b.data.shape}")
    ca = a.data.shape[1]

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g[:, :ca])
        if b.requires_grad:
            b._accumulate(g[:, ca:])

    return _wrap(np.concatenate([a.data, b.data], axis=1), (a, b), bwd)


def upsample_nearest2x(x: Tensor) -> Tensor:
    if x.data.ndim != 4:
        raise ValueError("upsample_nearest2x expects NCHW")
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def bwd(g):
        if x.requires_grad:
            n, c, h2, w2 = g.shape
            x._accumulate(g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)))

    return _wrap(out, (x,), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C) spatial mean."""
    if x.data.ndim != 4:
        raise ValueError("global_avg_pool expects NCHW")
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3), dtype=np.float64).astype(x.data.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.broadcast_to(g[:, :, None, None], x.data.shape) / (h * w))

    return _wrap(out, (x,), bwd)


def tile_spatial(v: Tensor, h: int, w: int) -> Tensor:
    """Broadcast (N, C) vectors to every location of an (N, C, h, w) map."""
    if v.data.ndim != 2:
        raise ValueError("tile_spatial expects (N, C)")
    out = np.broadcast_to(v.data[:, :, None, None], v.data.shape + (h, w)).copy()

    def bwd(g):
        if v.requires_grad:
            v._accumulate(g.sum(axis=(2, 3)))

    return _wrap(out, (v,), bwd)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """(N, F) @ (O, F)^T + (O,)"""
    if x.data.ndim != 2 or weight.data.ndim != 2 or bias.data.ndim != 1:
        raise ValueError("linear expects x (N,F), weight (O,F), bias (O,)")
    if x.data.shape[1] != weight.data.shape[1] or weight.data.shape[0] != bias.data.shape[0]:
        raise ValueError(
            f"linear: shape mismatch x{x.data.shape} w{weight.data.shape} b{bias.data.shape}"
        )

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data)
        if weight.requires_grad:
            weight._accumulate(g.T @ x.data)
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0))

    return _wrap(x.data @ weight.data.T + bias.data, (x, weight, bias), bwd)


# ---------------------------------------------------------------------------
# convolution


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """(N, C, H, W) -> contiguous (N*ho*wo, C*kh*kw) patch matrix."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # (N, C, ho, wo, kh, kw) -> (N*ho*wo, C*kh*kw)
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, c * kh * kw
    )
    return cols, ho, wo


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with (C_out, C_in, kh, kw) kernels."""
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ValueError("conv2d expects NCHW input and OIHW weight")
    n, c, h, w = x.data.shape
    co, ci, kh, kw = weight.data.shape
    if ci != c:
        raise ValueError(f"conv2d: input channels {c} != kernel channels {ci}")
    if bias.data.shape != (co,):
        raise ValueError(f"conv2d: bias shape {bias.data.shape} != ({co},)")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ValueError("conv2d: kernel larger than padded input")

    cols, ho, wo = _im2col(x.data, kh, kw, stride, padding)
    wmat = weight.data.reshape(co, ci * kh * kw)
    out2 = cols @ wmat.T + bias.data  # (N*ho*wo, co)
    out = np.ascontiguousarray(out2.reshape(n, ho, wo, co).transpose(0, 3, 1, 2))

    def bwd(g):
        go = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, co)
        if bias.requires_grad:
            bias._accumulate(go.sum(axis=0))
        if weight.requires_grad:
            weight._accumulate((go.T @ cols).reshape(weight.data.shape))
        if x.requires_grad:
            gcols = (go @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            if padding:
                gxp = gxp[:, :, padding:-padding, padding:-padding]
            x._accumulate(gxp)

    return _wrap(out, (x, weight, bias), bwd)


# ---------------------------------------------------------------------------
# loss


BCE_EPS = 1e-7


def bce_per_pixel(pred: Tensor, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean binary cross entropy over masked pixels (targets may be soft).

    Predictions are clamped to [eps, 1-eps]; pixels where the clamp is
    active receive zero gradient, matching the clamped forward value.
    """
    target = np.asarray(target)
    mask = np.asarray(mask).astype(bool)
    p_raw = pred.data.reshape(target.shape)
    if p_raw.shape != target.shape or mask.shape != target.shape:
        raise ValueError(
            f"bce_per_pixel: shapes pred{p_raw.shape} target{target.shape} mask{mask.shape}"
        )
    m = int(mask.sum())
    if m == 0:
        raise ValueError("bce_per_pixel: empty mask")
    p = np.clip(p_raw.astype(np.float64), BCE_EPS, 1.0 - BCE_EPS)
    t = target.astype(np.float64)
    terms = -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))
    value = terms[mask].sum() / m

    def bwd(g):
        if pred.requires_grad:
            gp = np.zeros_like(p)
            inside = mask & (p_raw > BCE_EPS) & (p_raw < 1.0 - BCE_EPS)
            gp[inside] = (-(t[inside] / p[inside]) + (1.0 - t[inside]) / (1.0 - p[inside])) / m
            pred._accumulate(float(g) * gp.reshape(pred.data.shape))

    return _wrap(np.array(value, dtype=np.float64), (pred,), bwd)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """First/second moment estimates per parameter, keyed by name."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: Dict[str, Tensor],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction; grads left untouched."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p.data -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.data.dtype)


def zero_grads(params: Dict[str, Tensor]) -> None:
    for p in params.values():
        p.zero_grad()
