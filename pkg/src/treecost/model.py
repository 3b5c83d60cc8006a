"""Tree-structured cost and cardinality estimator.

Embedding layer: ReLU dense blocks for the operator, metadata and sample
bitmap features; predicate leaves go through an affine map (no activation)
and are pooled with min for AND and max for OR.  Representation layer: the
tree cell applied bottom-up, children merged by averaging, empty children
as zero vectors.  Two heads (hidden ReLU, sigmoid output) give normalized
cost and cardinality for any sub-plan.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import nn
from .features import CodeLayout, EncodedNode, EncodedPlanBatch, deserialize_predicate
from .nn import Var

EPS = 1e-3
OMEGA_CANDIDATES = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass
class ModelConfig:
    hidden: int = 128
    emb_op: int = 64
    emb_meta: int = 64
    emb_bitmap: int = 64
    emb_pred: int = 64
    head_hidden: int = 64
    leaf_activation: str = "none"  # ablation toggle for the predicate leaf map
    seed: int = 0

    @property
    def input_width(self) -> int:
        return self.emb_op + self.emb_meta + self.emb_bitmap + self.emb_pred


# ------------------------------------------------------------ normalizer


@dataclass
class TargetNormalizer:
    """Min-max scaling of log(label) for cost and cardinality."""

    cost_lo: float = 0.0
    cost_hi: float = 1.0
    card_lo: float = 0.0
    card_hi: float = 1.0

    @classmethod
    def fit(cls, costs: Iterable[float], cards: Iterable[float]) -> "TargetNormalizer":
        def span(xs):
            logs = np.log(np.asarray([x for x in xs if np.isfinite(x)], dtype=np.float64))
            if logs.size == 0:
                return 0.0, 1.0
            lo, hi = float(logs.min()), float(logs.max())
            return (lo, hi) if hi > lo else (lo - 0.5, hi + 0.5)

        return cls(*span(costs), *span(cards))

    def _norm(self, x, lo, hi):
        return (np.log(np.asarray(x, dtype=np.float64)) - lo) / (hi - lo)

    def _denorm(self, y, lo, hi):
        return np.exp(lo + np.asarray(y, dtype=np.float64) * (hi - lo))

    def normalize_cost(self, x):
        return self._norm(x, self.cost_lo, self.cost_hi)

    def normalize_card(self, x):
        return self._norm(x, self.card_lo, self.card_hi)

    def denormalize_cost(self, y):
        return self._denorm(y, self.cost_lo, self.cost_hi)

    def denormalize_card(self, y):
        return self._denorm(y, self.card_lo, self.card_hi)


# ------------------------------------------------------------ metrics


def qerror(true_v: float, est_v: float) -> float:
    if true_v <= 0 or est_v <= 0:
        raise ValueError("q-error needs positive values")
    return max(true_v, est_v) / min(true_v, est_v)


def qerrors(true_v, est_v) -> np.ndarray:
    t = np.asarray(true_v, dtype=np.float64)
    e = np.asarray(est_v, dtype=np.float64)
    if (t <= 0).any() or (e <= 0).any():
        raise ValueError("q-error needs positive values")
    return np.maximum(t, e) / np.minimum(t, e)


METRIC_NAMES = ("median", "90th", "95th", "99th", "max", "mean")


def metrics(errors: Sequence[float]) -> dict[str, float]:
    """Median, tail means and max of a list of q-errors.

    The ``K``th entry is the mean of the sorted errors from index
    ``ceil(K/100 * n)`` (0-based) onwards, i.e. the largest (100-K)%.
    The slice never becomes empty: it keeps at least the maximum.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64))
    n = len(e)
    if n == 0:
        raise ValueError("metrics of an empty error list")

    def tail(k):
        start = min(math.ceil(k / 100 * n), n - 1)
        return float(e[start:].mean())

    return {
        "median": float(np.median(e)),
        "90th": tail(90),
        "95th": tail(95),
        "99th": tail(99),
        "max": float(e[-1]),
        "mean": float(e.mean()),
    }


# ------------------------------------------------------------ model


@dataclass
class Counters:
    cell_calls: int = 0
    cell_rows: int = 0


class TreeCostModel:
    def __init__(self, widths: dict[str, int], config: ModelConfig | None = None, dtype=np.float32):
        self.widths = dict(widths)
        self.config = config or ModelConfig()
        self.dtype = dtype
        self.counters = Counters()
        c = self.config
        rng = np.random.default_rng(c.seed)
        init = lambda i, o, name: nn.init_dense(rng, i, o, name, dtype)  # noqa: E731
        self.emb_op = init(widths["op"], c.emb_op, "emb_op")
        self.emb_meta = init(widths["meta"], c.emb_meta, "emb_meta")
        self.emb_bitmap = init(widths["bitmap"], c.emb_bitmap, "emb_bitmap")
        self.emb_pred = init(widths["code"], c.emb_pred, "emb_pred")
        self.cell = nn.init_cell(rng, c.input_width, c.hidden, "cell", dtype)
        self.cost_hidden = init(c.hidden, c.head_hidden, "cost_hidden")
        self.cost_out = init(c.head_hidden, 1, "cost_out")
        self.card_hidden = init(c.hidden, c.head_hidden, "card_hidden")
        self.card_out = init(c.head_hidden, 1, "card_out")

    # -------------------------------------------------------- params

    def dense_blocks(self) -> dict[str, nn.DenseParams]:
        out = {
            "emb_op": self.emb_op,
            "emb_meta": self.emb_meta,
            "emb_bitmap": self.emb_bitmap,
            "emb_pred": self.emb_pred,
            "cost_hidden": self.cost_hidden,
            "cost_out": self.cost_out,
            "card_hidden": self.card_hidden,
            "card_out": self.card_out,
        }
        for k, b in self.cell.blocks().items():
            out[f"cell.{k}"] = b
        return out

    def params(self) -> dict[str, Var]:
        out = {}
        for name, b in self.dense_blocks().items():
            out[name + ".W"] = b.W
            out[name + ".b"] = b.b
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params().items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.params()
        missing = set(params) - set(arrays)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in params.items():
            if arrays[k].shape != p.shape:
                raise ValueError(f"{k}: shape {arrays[k].shape} != {p.shape}")
            p.value = np.asarray(arrays[k], dtype=self.dtype).copy()

    def astype(self, dtype) -> "TreeCostModel":
        """A copy with parameters in ``dtype`` (float64 for gradient checks)."""
        m = TreeCostModel(self.widths, self.config, dtype)
        m.load_state_dict(self.state_dict())
        return m

    # -------------------------------------------------------- embedding

    def _const(self, a) -> Var:
        return nn.const(np.asarray(a, dtype=self.dtype))

    def _leaf_map(self, codes: Var) -> Var:
        return nn.apply_dense(self.emb_pred, codes, self.config.leaf_activation)

    def embed_rows(self, op, meta, bitmap, pred: Var) -> Var:
        return nn.concat([
            nn.apply_dense(self.emb_op, self._const(op), "relu"),
            nn.apply_dense(self.emb_meta, self._const(meta), "relu"),
            nn.apply_dense(self.emb_bitmap, self._const(bitmap), "relu"),
            pred,
        ])

    def embed_predicate(self, tree, codes: np.ndarray) -> Var:
        """Recursive pooling over a deserialized predicate (single row)."""
        if isinstance(tree, (int, np.integer)):
            return self._leaf_map(self._const(codes[tree][None, :]))
        kind, l, r = tree
        a = self.embed_predicate(l, codes)
        b = self.embed_predicate(r, codes)
        return nn.pool_pair(a, b, "min" if kind == "and" else "max")

    def _program_slots(self, batch: EncodedPlanBatch) -> Var | None:
        prog = batch.program
        if len(prog.leaf_codes) == 0:
            return None
        slots = self._leaf_map(self._const(prog.leaf_codes))
        for left, right, is_and in prog.groups:
            pooled = nn.pool_select(nn.gather_rows(slots, left), nn.gather_rows(slots, right), is_and)
            slots = nn.concat([slots, pooled], axis=0)
        return slots

    # -------------------------------------------------------- representation

    def _zeros(self, n: int) -> Var:
        return self._const(np.zeros((n, self.config.hidden)))

    def forward_batch(self, batch: EncodedPlanBatch) -> list[tuple[Var, Var]]:
        """Level-wise evaluation; returns (G, R) per level, level 0 = roots."""
        slots = self._program_slots(batch)
        states: list[tuple[Var, Var] | None] = [None] * batch.depth
        for d in range(batch.depth - 1, -1, -1):
            lv = batch.levels[d]
            n = len(lv)
            if slots is None:
                pred = self._const(np.zeros((n, self.config.emb_pred)))
            else:
                pred = nn.gather_rows(slots, lv.pred_slot)
            x = self.embed_rows(lv.op, lv.meta, lv.bitmap, pred)
            if d + 1 < batch.depth:
                g_next, r_next = states[d + 1]
                g_prev = nn.mean2(nn.gather_rows(g_next, lv.left), nn.gather_rows(g_next, lv.right))
                r_prev = nn.mean2(nn.gather_rows(r_next, lv.left), nn.gather_rows(r_next, lv.right))
            else:
                g_prev = r_prev = self._zeros(n)
            states[d] = nn.lstm_cell(self.cell, x, g_prev, r_prev)
            nn.check_finite(states[d][1], f"level {d}")
            self.counters.cell_calls += 1
            self.counters.cell_rows += n
        return states

    def node_state(self, node: EncodedNode, left: tuple[Var, Var] | None, right: tuple[Var, Var] | None) -> tuple[Var, Var]:
        """One cell step for a single node given its children's states."""
        f = node.features
        if f.predicate is None:
            pred = self._const(np.zeros((1, self.config.emb_pred)))
        else:
            layout = CodeLayout(self.widths["n_columns"], self.widths["string_dim"])
            pred = self.embed_predicate(deserialize_predicate(f.predicate, layout), f.predicate)
        x = self.embed_rows(f.op[None, :], f.meta[None, :], f.bitmap[None, :], pred)
        zero = (self._zeros(1), self._zeros(1))
        gl, rl = left or zero
        gr, rr = right or zero
        g, r = nn.lstm_cell(self.cell, x, nn.mean2(gl, gr), nn.mean2(rl, rr))
        self.counters.cell_calls += 1
        self.counters.cell_rows += 1
        return g, r

    def forward_recursive(self, node: EncodedNode) -> dict[int, tuple[Var, Var]]:
        """Per-node evaluation; maps ``id(encoded node)`` to its (G, R)."""
        out: dict[int, tuple[Var, Var]] = {}

        def rec(n: EncodedNode | None):
            if n is None:
                return None
            s = self.node_state(n, rec(n.left), rec(n.right))
            out[id(n)] = s
            return s

        rec(node)
        return out

    # -------------------------------------------------------- heads

    def heads(self, r: Var) -> tuple[Var, Var]:
        cost = nn.apply_dense(self.cost_out, nn.apply_dense(self.cost_hidden, r, "relu"), "sigmoid")
        card = nn.apply_dense(self.card_out, nn.apply_dense(self.card_hidden, r, "relu"), "sigmoid")
        return cost, card

    def predict_batch(self, batch: EncodedPlanBatch) -> tuple[np.ndarray, np.ndarray]:
        """Normalized (cost, card) for every root in the batch."""
        _, r = self.forward_batch(batch)[0]
        cost, card = self.heads(r)
        return cost.value[:, 0].astype(np.float64), card.value[:, 0].astype(np.float64)


# ------------------------------------------------------------ loss


def to_unit(y) -> np.ndarray:
    """Map normalized targets from [0, 1] into [EPS, 1]."""
    return EPS + (1 - EPS) * np.clip(np.asarray(y, dtype=np.float64), 0.0, 1.0)


def qerror_loss(cost_pred: Var, card_pred: Var, cost_target: np.ndarray, card_target: np.ndarray, omega: float) -> Var:
    """mean(omega * qerror(cost) + qerror(card)) in normalized space."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    n = cost_pred.shape[0]
    qc = nn.qerror(nn.affine_const(cost_pred, EPS, 1.0), to_unit(cost_target).reshape(n, 1))
    qk = nn.qerror(nn.affine_const(card_pred, EPS, 1.0), to_unit(card_target).reshape(n, 1))
    return nn.add(nn.weighted_sum(qc, np.full((n, 1), omega / n)), nn.weighted_sum(qk, np.full((n, 1), 1.0 / n)))


def loss_value(cost_q: Sequence[float], card_q: Sequence[float], omega: float) -> float:
    cq = np.asarray(cost_q, dtype=np.float64)
    kq = np.asarray(card_q, dtype=np.float64)
    return float(np.mean(omega * cq + kq))


# ------------------------------------------------------------ checkpoints

CHECKPOINT_KIND = "treecost-model"


def save_checkpoint(path, model: TreeCostModel, normalizer: TargetNormalizer, extra: dict | None = None) -> None:
    meta = {
        "kind": CHECKPOINT_KIND,
        "widths": model.widths,
        "config": asdict(model.config),
        "normalizer": asdict(normalizer),
        "extra": extra or {},
    }
    nn.save_params(path, model.state_dict(), meta)


def load_checkpoint(path) -> tuple[TreeCostModel, TargetNormalizer, dict]:
    arrays, meta = nn.load_params(path)
    if meta.get("kind") != CHECKPOINT_KIND:
        raise nn.CheckpointError("not a model checkpoint")
    model = TreeCostModel(meta["widths"], ModelConfig(**meta["config"]))
    model.load_state_dict(arrays)
    return model, TargetNormalizer(**meta["normalizer"]), meta.get("extra", {})
