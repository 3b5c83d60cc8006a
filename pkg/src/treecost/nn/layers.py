"""Parameter blocks, the tree cell, and a parameter registry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Var, add, concat, dense, mean2, mul, param, relu, sigmoid, tanh


@dataclass
class DenseParams:
    W: Var
    b: Var

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]


def init_dense(rng: np.random.Generator, in_dim: int, out_dim: int, name: str, dtype=np.float32) -> DenseParams:
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim)).astype(dtype)
    return DenseParams(param(w, name + ".W"), param(np.zeros(out_dim, dtype=dtype), name + ".b"))


ACTIVATIONS = {"none": lambda v: v, "relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def apply_dense(p: DenseParams, x: Var, act: str = "none") -> Var:
    return ACTIVATIONS[act](dense(x, p.W, p.b))


@dataclass
class LstmCellParams:
    f: DenseParams
    k1: DenseParams
    r: DenseParams
    k2: DenseParams

    @property
    def hidden(self) -> int:
        return self.f.out_dim

    def blocks(self):
        return {"f": self.f, "k1": self.k1, "r": self.r, "k2": self.k2}


def init_cell(rng: np.random.Generator, in_dim: int, hidden: int, name: str = "cell", dtype=np.float32) -> LstmCellParams:
    return LstmCellParams(*(init_dense(rng, hidden + in_dim, hidden, f"{name}.{k}", dtype) for k in ("f", "k1", "r", "k2")))


def lstm_cell(p: LstmCellParams, x: Var, g_prev: Var, r_prev: Var) -> tuple[Var, Var]:
    """One step of the tree cell over a batch of rows.

    f, k1, k2 are sigmoid gates over [R_prev, x]; r is a tanh candidate;
    G = f*G_prev + k1*r and R = k2*tanh(G).
    """
    h = p.hidden
    if g_prev.shape[1] != h or r_prev.shape[1] != h or x.shape[1] + h != p.f.in_dim:
        raise ValueError(f"cell shape mismatch: x{x.shape} G{g_prev.shape} R{r_prev.shape} hidden {h}")
    rx = concat([r_prev, x])
    f = sigmoid(dense(rx, p.f.W, p.f.b))
    k1 = sigmoid(dense(rx, p.k1.W, p.k1.b))
    r = tanh(dense(rx, p.r.W, p.r.b))
    k2 = sigmoid(dense(rx, p.k2.W, p.k2.b))
    g = add(mul(f, g_prev), mul(k1, r))
    return g, mul(k2, tanh(g))


def merge_children(gl: Var, gr: Var, rl: Var, rr: Var) -> tuple[Var, Var]:
    return mean2(gl, gr), mean2(rl, rr)
