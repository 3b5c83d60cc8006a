"""Reverse-mode gradients over 2-D numpy arrays.

Only the handful of ops the estimator needs.  Each op returns a ``Var``
holding its value and a closure that pushes the output gradient to its
inputs; ``backward`` replays the closures in reverse topological order.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class NonFiniteError(FloatingPointError):
    """A forward value became NaN or infinite."""


class Var:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(self, value, parents: Sequence["Var"] = (), backward: Callable | None = None,
                 requires_grad: bool = False, name: str = ""):
        self.value = np.asarray(value)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var({self.name or 'anon'}, shape={self.shape})"

    def zero_grad(self):
        self.grad = None

    def _accum(self, g: np.ndarray):
        if not self.requires_grad:
            return
        self.grad = g.copy() if self.grad is None else self.grad + g

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.value.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.value)
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        self._accum(np.asarray(grad, dtype=self.value.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def param(value, name: str = "") -> Var:
    return Var(value, requires_grad=True, name=name)


def const(value) -> Var:
    return Var(value)


def _op(value, parents, backward) -> Var:
    out = Var(value, parents)
    if out.requires_grad:
        out._backward = backward
    return out


def check_finite(v: Var, where: str = "") -> Var:
    if not np.isfinite(v.value).all():
        raise NonFiniteError(f"non-finite values in {where or v.name or 'forward pass'}")
    return v


# ------------------------------------------------------------------ ops


def dense(x: Var, w: Var, b: Var) -> Var:
    """``x @ W.T + b`` for x of shape (n, in), W (out, in), b (out,)."""
    if x.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ValueError(f"dense shape mismatch: x{x.shape} W{w.shape} b{b.shape}")

    def back(g):
        x._accum(g @ w.value)
        w._accum(g.T @ x.value)
        b._accum(g.sum(axis=0))

    return _op(x.value @ w.value.T + b.value, (x, w, b), back)


def relu(x: Var) -> Var:
    mask = x.value > 0
    return _op(np.where(mask, x.value, 0).astype(x.value.dtype), (x,), lambda g: x._accum(g * mask))


def sigmoid(x: Var) -> Var:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.value))  # overflow-free logistic
    return _op(s, (x,), lambda g: x._accum(g * s * (1 - s)))


def tanh(x: Var) -> Var:
    t = np.tanh(x.value)
    return _op(t, (x,), lambda g: x._accum(g * (1 - t * t)))


def add(a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")

    def back(g):
        a._accum(g)
        b._accum(g)

    return _op(a.value + b.value, (a, b), back)


def mul(a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch {a.shape} vs {b.shape}")

    def back(g):
        a._accum(g * b.value)
        b._accum(g * a.value)

    return _op(a.value * b.value, (a, b), back)


def scale(a: Var, c: float) -> Var:
    return _op(a.value * a.value.dtype.type(c), (a,), lambda g: a._accum(g * c))


def mean2(a: Var, b: Var) -> Var:
    return scale(add(a, b), 0.5)


def concat(parts: Sequence[Var], axis: int = 1) -> Var:
    sizes = [p.shape[axis] for p in parts]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        for p, piece in zip(parts, np.split(g, cuts, axis=axis)):
            p._accum(piece)

    return _op(np.concatenate([p.value for p in parts], axis=axis), parts, back)


def gather_rows(x: Var, idx: np.ndarray) -> Var:
    """Rows ``x[idx]``; index -1 yields a zero row."""
    idx = np.asarray(idx, dtype=np.int64)
    valid = idx >= 0
    out = np.zeros((len(idx),) + x.shape[1:], dtype=x.value.dtype)
    out[valid] = x.value[idx[valid]]

    def back(g):
        gx = np.zeros_like(x.value)
        np.add.at(gx, idx[valid], g[valid])
        x._accum(gx)

    return _op(out, (x,), back)


def pool_pair(a: Var, b: Var, mode: str) -> Var:
    """Elementwise min or max; the gradient goes to the selected input, ties to ``a``."""
    if a.shape != b.shape:
        raise ValueError(f"pool shape mismatch {a.shape} vs {b.shape}")
    if mode == "min":
        pick_a = a.value <= b.value
    elif mode == "max":
        pick_a = a.value >= b.value
    else:
        raise ValueError(f"unknown pooling mode {mode!r}")
    return _select(a, b, pick_a)


def pool_select(a: Var, b: Var, is_min: np.ndarray) -> Var:
    """Row-wise pooling: min for rows where ``is_min`` is set, max elsewhere."""
    is_min = np.asarray(is_min, dtype=bool)[:, None]
    pick_a = np.where(is_min, a.value <= b.value, a.value >= b.value)
    return _select(a, b, pick_a)


def _select(a: Var, b: Var, pick_a: np.ndarray) -> Var:
    def back(g):
        a._accum(np.where(pick_a, g, 0))
        b._accum(np.where(pick_a, 0, g))

    return _op(np.where(pick_a, a.value, b.value), (a, b), back)


def affine_const(x: Var, lo: float, hi: float) -> Var:
    """Map values from [0, 1] to [lo, hi]."""
    s = hi - lo
    return _op(lo + s * x.value, (x,), lambda g: x._accum(g * s))


def qerror(pred: Var, target: np.ndarray) -> Var:
    """Elementwise max(p, t) / min(p, t) for strictly positive p and t."""
    p, t = pred.value, np.asarray(target, dtype=pred.value.dtype)
    if (p <= 0).any() or (t <= 0).any():
        raise ValueError("q-error needs strictly positive values")
    over = p >= t
    q = np.where(over, p / t, t / p)
    return _op(q, (pred,), lambda g: pred._accum(g * np.where(over, 1 / t, -t / (p * p))))


def weighted_sum(x: Var, w: np.ndarray) -> Var:
    w = np.asarray(w, dtype=x.value.dtype).reshape(x.shape)
    return _op(np.array((x.value * w).sum(), dtype=x.value.dtype), (x,), lambda g: x._accum(g * w))


def mean(x: Var) -> Var:
    return weighted_sum(x, np.full(x.shape, 1.0 / x.value.size))
