"""Independence baseline: equi-width histograms and textbook join sizes.

Selectivities of a scan's predicate leaves are multiplied (AND) or combined
as ``s1 + s2 - s1*s2`` (OR).  An equi-join of inputs with cardinalities
``|A|`` and ``|B|`` is estimated as ``|A|*|B| / max(dv(a), dv(b))``.
String predicates use exact value frequencies for equality and a fixed row
sample for LIKE.  Costs come from the same unit-cost model as the executor,
fed with estimated cardinalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..catalog import Database
from ..plan import AGGREGATE_OPS, ColumnRef, JOIN_OPS, PlanNode, PredicateNode, SCAN_OPS, qualify_predicate
from .executor import DEFAULT_COSTS, UnitCosts, operator_cost


@dataclass
class _Hist:
    edges: np.ndarray
    counts: np.ndarray
    distinct: np.ndarray  # distinct values per bucket
    n: int

    def lt(self, v: float) -> float:
        """Estimated fraction of rows with value < v (uniform within buckets)."""
        e = self.edges
        if v <= e[0]:
            return 0.0
        if v > e[-1]:
            return 1.0
        k = min(int(np.searchsorted(e, v, "right")) - 1, len(self.counts) - 1)
        width = e[k + 1] - e[k]
        part = (v - e[k]) / width if width > 0 else 0.0
        return float((self.counts[:k].sum() + part * self.counts[k]) / self.n)

    def eq(self, v: float) -> float:
        e = self.edges
        if v < e[0] or v > e[-1]:
            return 0.0
        k = min(int(np.searchsorted(e, v, "right")) - 1, len(self.counts) - 1)
        if self.distinct[k] == 0:
            return 0.0
        return float(self.counts[k] / self.distinct[k] / self.n)


class IndependenceBaseline:
    def __init__(self, db: Database, buckets: int = 64, string_sample: int = 1000, seed: int = 0,
                 costs: UnitCosts = DEFAULT_COSTS):
        self.db = db
        self.costs = costs
        self.hists: dict[str, _Hist] = {}
        self.freq: dict[str, dict[str, int]] = {}
        self.samples: dict[str, np.ndarray] = {}
        self.dv: dict[str, int] = {}
        rng = np.random.default_rng(seed)
        for col in db.catalog.columns:
            v = db.column(col.name)
            if col.kind == "numeric":
                x = v.astype(np.float64)
                lo, hi = float(x.min()), float(x.max())
                edges = np.linspace(lo, hi if hi > lo else lo + 1, buckets + 1)
                which = np.clip(np.searchsorted(edges, x, "right") - 1, 0, buckets - 1)
                counts = np.bincount(which, minlength=buckets).astype(np.float64)
                distinct = np.array([len(np.unique(x[which == b])) for b in range(buckets)], dtype=np.float64)
                self.hists[col.name] = _Hist(edges, counts, distinct, len(x))
            else:
                vals, cnt = np.unique(v.astype(str), return_counts=True)
                self.freq[col.name] = dict(zip(vals.tolist(), cnt.tolist()))
                k = min(string_sample, len(v))
                self.samples[col.name] = v[np.sort(rng.choice(len(v), size=k, replace=False))]
            self.dv[col.name] = len(np.unique(v.astype(str) if v.dtype == object else v))

    # -------------------------------------------------------- selectivity

    def selectivity(self, p: PredicateNode) -> float:
        if p.kind == "and":
            s = 1.0
            for c in p.children:
                s *= self.selectivity(c)
            return s
        if p.kind == "or":
            s = 0.0
            for c in p.children:
                t = self.selectivity(c)
                s = s + t - s * t
            return s
        if isinstance(p.operand, ColumnRef):
            return 1.0 / max(self.dv[p.column], self.dv[p.operand.name])
        col, op, v = p.column, p.operator, p.operand
        if col in self.hists:
            h = self.hists[col]
            v = float(v)
            if op == "<":
                return h.lt(v)
            if op == ">":
                return max(0.0, 1.0 - h.lt(v) - h.eq(v))
            if op == "=":
                return h.eq(v)
            if op == "!=":
                return 1.0 - h.eq(v)
            raise ValueError(f"operator {op} on numeric column")
        n = self.db.rows(col.split(".")[0])
        if op in ("=", "!="):
            s = self.freq[col].get(v, 0) / n
            return s if op == "=" else 1.0 - s
        sample = self.samples[col]
        hit = float(kernels.like_mask(sample, v).mean()) if len(sample) else 0.0
        hit = max(hit, 0.5 / max(1, len(sample)))  # never claim an empty LIKE
        return hit if op == "LIKE" else 1.0 - hit

    # -------------------------------------------------------- plans

    def estimate_node(self, node: PlanNode) -> tuple[float, float]:
        """(cardinality, cost) of ``node``."""
        kids = [self.estimate_node(c) for c in node.inputs]
        if node.op in SCAN_OPS:
            rows = self.db.rows(node.table)
            card = rows * (1.0 if node.predicate is None else self.selectivity(qualify_predicate(node.predicate, node.table)))
        elif node.op in JOIN_OPS:
            (lc, _), (rc, _) = kids
            card = lc * rc
            if node.predicate is not None:
                card *= self.selectivity(node.predicate)
        elif node.op in AGGREGATE_OPS:
            card = 1.0
        else:
            card = kids[0][0]
        card = max(1.0, card)
        rows = float(self.db.rows(node.table)) if node.table is not None else 0.0
        own = operator_cost(node, card, [k[0] for k in kids], rows, self.costs)
        return card, max(1e-3, own + sum(k[1] for k in kids))

    def estimate(self, plan: PlanNode) -> tuple[float, float]:
        """(cost, card) at the root, the same order the model reports."""
        card, cost = self.estimate_node(plan)
        return cost, card
