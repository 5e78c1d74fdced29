"""Dense-array reverse-mode autodiff on top of numpy storage.

Every op builds a node in an implicit DAG; Tensor.backward() replays the tape
in reverse topological order and accumulates gradients additively, so a value
used twice receives the sum of both contributions. Compute dtype follows the
operands (float32 for training, float64 for gradient checks); nothing here
upcasts silently.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np
from scipy.special import erf

from .errors import (
    ContractError,
    DegenerateMaskError,
    DimensionError,
    NonFiniteLossError,
    VocabIndexError,
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Additive attention-mask value: large enough that exp() underflows to exactly
# 0.0 after max-subtraction (keeps causality bitwise), small enough to stay
# finite in float32.
NEG_INF_FILL = -1e9

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation hot path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{tag})"

    def accumulate_grad(self, g: np.ndarray) -> None:
        # additive accumulation across every use of this tensor
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph construction -------------------------------------------------

    def _child(self, data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -other)

    def matmul(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def transpose(self, ax0: int, ax1: int) -> "Tensor":
        return transpose(self, ax0, ax1)

    def reshape(self, shape: tuple) -> "Tensor":
        return reshape(self, shape)

    def sum(self) -> "Tensor":
        return sum_all(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast_suffix(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g over the leading axes it gained relative to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    return g


def add(a: Tensor, b) -> Tensor:
    """Elementwise add; the rhs may also be a scalar or a trailing suffix of
    a's shape (bias-add pattern). No other broadcasting is allowed."""
    if not isinstance(b, Tensor):
        bval = float(b)
        data = a.data + bval

        def bwd_scalar(g):
            if a.requires_grad:
                a.accumulate_grad(g)

        return a._child(data, (a,), bwd_scalar)

    suffix_ok = b.ndim <= a.ndim and a.shape[a.ndim - b.ndim :] == b.shape
    if a.shape != b.shape and not suffix_ok:
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")
    data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast_suffix(g, b.shape))

    return a._child(data, (a, b), bwd)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; scalar rhs allowed, otherwise shapes must match."""
    if not isinstance(b, Tensor):
        bval = float(b)
        data = a.data * bval

        def bwd_scalar(g):
            if a.requires_grad:
                a.accumulate_grad(g * bval)

        return a._child(data, (a,), bwd_scalar)

    if a.shape != b.shape:
        raise DimensionError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return a._child(data, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a [..., m, k] @ b -> [..., m, n].

    b is either 2-D [k, n] (a weight, shared across leading dims) or has the
    same leading dims as a. dA = dC @ B^T, dB = A^T @ dC, with dB summed over
    leading dims when b is shared.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul requires rank >= 2 operands")
    if b.ndim != 2 and b.shape[:-2] != a.shape[:-2]:
        raise DimensionError(
            f"matmul: leading dims differ, {a.shape} vs {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner dims differ, {a.shape} vs {b.shape}")
    data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                k, n = b.shape
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(gb)

    return a._child(data, (a, b), bwd)


def transpose(x: Tensor, ax0: int, ax1: int) -> Tensor:
    data = np.swapaxes(x.data, ax0, ax1)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(np.swapaxes(g, ax0, ax1))

    return x._child(data, (x,), bwd)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    data = x.data.reshape(shape)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return x._child(data, (x,), bwd)


def concat(xs: list[Tensor], axis: int = 0) -> Tensor:
    if not xs:
        raise DimensionError("concat of zero tensors")
    data = np.concatenate([t.data for t in xs], axis=axis)
    sizes = [t.shape[axis] for t in xs]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(xs, pieces):
            if t.requires_grad:
                t.accumulate_grad(piece)

    out = xs[0]._child(data, tuple(xs), bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    data = np.asarray(x.data.sum(), dtype=x.dtype)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g, x.shape).astype(x.dtype))

    return x._child(data, (x,), bwd)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    return mul(sum_all(x), 1.0 / n)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU: 0.5 * x * (1 + erf(x / sqrt(2)))."""
    e = erf(x.data * _INV_SQRT2)
    data = 0.5 * x.data * (1.0 + e)

    def bwd(g):
        if x.requires_grad:
            # d/dx = Phi(x) + x * phi(x)
            phi = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
            x.accumulate_grad(g * (0.5 * (1.0 + e) + x.data * phi))

    return x._child(data, (x,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply the affine (gain, bias)."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            f"layer_norm affine must have shape ({d},), got {gain.shape}/{bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    data = xhat * gain.data + bias.data

    def bwd(g):
        if gain.requires_grad:
            gain.accumulate_grad((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias.accumulate_grad(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x.accumulate_grad(inv_std * (gx - m1 - xhat * m2))

    return x._child(data, (x, gain, bias), bwd)


def softmax(x: Tensor) -> Tensor:
    """Stable softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            inner = (g * p).sum(axis=-1, keepdims=True)
            x.accumulate_grad(p * (g - inner))

    return x._child(p, (x,), bwd)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of table [V, d] by an integer id array of any shape."""
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise DimensionError(f"embedding table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise VocabIndexError(
            f"id out of range [0, {table.shape[0]}): {int(ids.min())}..{int(ids.max())}"
        )
    data = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
            table.accumulate_grad(gt)

    return table._child(data, (table,), bwd)


def softmax_cross_entropy(logits: Tensor, targets, mask) -> Tensor:
    """Masked mean NLL over rows of logits [N, V].

    loss = sum_t mask_t * (-log softmax(logits_t)[targets_t]) / max(1, sum_t mask_t)

    Stable via max-subtraction. A position with mask 0 contributes exactly zero
    regardless of its target label. All-zero masks are refused rather than
    silently returning 0.
    """
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [N, V], got {logits.shape}")
    n, v = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    mask_arr = np.asarray(mask, dtype=logits.dtype)
    if targets.shape != (n,) or mask_arr.shape != (n,):
        raise DimensionError(
            f"targets/mask must be [{n}], got {targets.shape}/{mask_arr.shape}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise VocabIndexError(
            f"target id outside vocab of size {v}: "
            f"{int(targets.min())}..{int(targets.max())}"
        )
    total_mask = float(mask_arr.sum())
    if total_mask == 0.0:
        raise DegenerateMaskError("loss mask selects no positions")

    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    rows = np.arange(n)
    logp = z[rows, targets] - lse
    denom = max(1.0, total_mask)
    loss = -(mask_arr * logp).sum() / denom
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"non-finite loss: {loss}")
    data = np.asarray(loss, dtype=logits.dtype)

    def bwd(g):
        if logits.requires_grad:
            p = np.exp(z - lse[:, None])
            p[rows, targets] -= 1.0
            p *= (mask_arr / denom)[:, None]
            logits.accumulate_grad(p * g)

    return logits._child(data, (logits,), bwd)
