"""Exact reference execution of plans over an in-memory database.

Cardinalities are exact.  Cost is a deterministic unit-cost model rather
than wall-clock time: every operator charges per tuple it touches, and a
node's cost includes its inputs' costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..catalog import Database
from ..plan import AGGREGATE_OPS, ColumnRef, JOIN_OPS, PlanNode, PredicateNode, SCAN_OPS, qualify_predicate
from ..predicates import evaluate


class ResourceLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class UnitCosts:
    seq_tuple: float = 1.0
    pred_leaf_tuple: float = 0.2
    index_probe: float = 4.0
    index_tuple: float = 2.0
    hash_build: float = 1.5
    hash_probe: float = 1.0
    join_output: float = 0.1
    merge_tuple: float = 1.0
    nested_pair: float = 0.05
    sort_factor: float = 0.05
    agg_tuple: float = 1.0


DEFAULT_COSTS = UnitCosts()


def _n_leaves(p: PredicateNode | None) -> int:
    return 0 if p is None else sum(1 for _ in p.leaves())


def _sort_cost(n: float, c: UnitCosts) -> float:
    return c.sort_factor * n * math.log2(n + 2)


def operator_cost(node: PlanNode, out_card: float, in_cards: list[float], table_rows: float, c: UnitCosts) -> float:
    """Own cost of ``node`` (inputs excluded) from tuple counts alone."""
    leaves = _n_leaves(node.predicate)
    op = node.op
    if op == "SeqScan":
        return table_rows * (c.seq_tuple + c.pred_leaf_tuple * leaves)
    if op in SCAN_OPS:
        return c.index_probe * math.log2(table_rows + 2) + out_card * (c.index_tuple + c.pred_leaf_tuple * leaves)
    if op in JOIN_OPS:
        left, right = in_cards
        extra = c.pred_leaf_tuple * max(0, leaves - 1) * out_card
        if op == "HashJoin":
            return c.hash_build * right + c.hash_probe * left + c.join_output * out_card + extra
        if op == "MergeJoin":
            return _sort_cost(left, c) + _sort_cost(right, c) + c.merge_tuple * (left + right) + extra
        return c.nested_pair * left * right + c.join_output * out_card + extra
    (n_in,) = in_cards
    if op in AGGREGATE_OPS:
        return c.agg_tuple * n_in
    return _sort_cost(n_in, c)


# ------------------------------------------------------------ relations


class _Columns:
    """Lazy column view of a relation (row ids per table)."""

    def __init__(self, db: Database, rel: dict[str, np.ndarray]):
        self.db, self.rel = db, rel
        self._cache: dict[str, np.ndarray] = {}

    def __contains__(self, name: str) -> bool:
        return name.split(".", 1)[0] in self.rel

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self._cache:
            t = name.split(".", 1)[0]
            if t not in self.rel:
                raise KeyError(name)
            self._cache[name] = self.db.column(name)[self.rel[t]]
        return self._cache[name]


def _rel_len(rel: dict[str, np.ndarray]) -> int:
    return len(next(iter(rel.values()))) if rel else 0


def _conjuncts(p: PredicateNode) -> list[PredicateNode]:
    if p.kind == "and":
        return [x for c in p.children for x in _conjuncts(c)]
    return [p]


def _equi_join(lv: np.ndarray, rv: np.ndarray, limit: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(rv, kind="stable")
    rs = rv[order]
    lo = np.searchsorted(rs, lv, "left")
    hi = np.searchsorted(rs, lv, "right")
    counts = hi - lo
    total = int(counts.sum())
    if total > limit:
        raise ResourceLimitExceeded(f"join produces {total} rows, limit {limit}")
    li = np.repeat(np.arange(len(lv)), counts)
    starts = np.repeat(lo - (np.cumsum(counts) - counts), counts)
    ri = order[np.arange(total) + starts]
    return li, ri


@dataclass
class Executor:
    db: Database
    costs: UnitCosts = DEFAULT_COSTS
    row_limit: int = 5_000_000

    def run(self, node: PlanNode) -> tuple[dict[str, np.ndarray], PlanNode]:
        """Result relation and a copy of ``node`` labelled at every level."""
        kids = [None if c is None else self.run(c) for c in node.children]
        inputs = [k for k in kids if k is not None]
        rel = self._execute(node, [r for r, _ in inputs])
        out_card = _rel_len(rel)
        in_cards = [float(max(1, _rel_len(r))) for r, _ in inputs]
        rows = float(self.db.rows(node.table)) if node.table is not None else 0.0
        own = operator_cost(node, float(max(1, out_card)), in_cards, rows, self.costs)
        total = own + sum(lab.true_cost for _, lab in inputs)
        labelled_children = tuple(None if k is None else k[1] for k in kids)
        labelled = replace(node, children=labelled_children).with_labels(out_card, total)
        return rel, labelled

    def _execute(self, node: PlanNode, inputs: list[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
        if node.op in SCAN_OPS:
            n = self.db.rows(node.table)
            ids = np.arange(n)
            if node.predicate is not None:
                mask = evaluate(qualify_predicate(node.predicate, node.table), _Columns(self.db, {node.table: ids}), n)
                ids = ids[mask]
            return {node.table: ids}
        if node.op in JOIN_OPS:
            left, right = inputs
            return self._join(node.predicate, left, right)
        (child,) = inputs
        if node.op in AGGREGATE_OPS:
            if node.columns and node.op == "HashAggregate":
                cols = _Columns(self.db, child)
                keys = np.stack([np.asarray(cols[c]).astype(str) for c in node.columns], axis=1)
                _, first = np.unique(keys, axis=0, return_index=True)
                return {t: v[np.sort(first)] for t, v in child.items()}
            return {t: v[:1] for t, v in child.items()}
        return child

    def _join(self, p: PredicateNode | None, left, right) -> dict[str, np.ndarray]:
        conj = [] if p is None else _conjuncts(p)
        key = None
        for leaf in conj:
            if leaf.kind == "expr" and leaf.operator == "=" and isinstance(leaf.operand, ColumnRef):
                a, b = leaf.column.split(".")[0], leaf.operand.name.split(".")[0]
                if a in left and b in right:
                    key = (leaf, leaf.column, leaf.operand.name)
                elif b in left and a in right:
                    key = (leaf, leaf.operand.name, leaf.column)
                if key:
                    break
        if key is not None:
            leaf, lc, rc = key
            li, ri = _equi_join(_Columns(self.db, left)[lc], _Columns(self.db, right)[rc], self.row_limit)
            rest = [c for c in conj if c is not leaf]
        else:
            nl, nr = _rel_len(left), _rel_len(right)
            if nl * nr > self.row_limit:
                raise ResourceLimitExceeded(f"cross product of {nl}x{nr} rows, limit {self.row_limit}")
            li, ri = np.repeat(np.arange(nl), nr), np.tile(np.arange(nr), nl)
            rest = conj
        rel = {t: v[li] for t, v in left.items()}
        rel.update({t: v[ri] for t, v in right.items()})
        for c in rest:
            rel_n = _rel_len(rel)
            mask = evaluate(c, _Columns(self.db, rel), rel_n)
            rel = {t: v[mask] for t, v in rel.items()}
        return rel


def execute_reference(plan: PlanNode, db: Database, costs: UnitCosts = DEFAULT_COSTS, row_limit: int = 5_000_000) -> PlanNode:
    """``plan`` with exact ``true_card`` / ``true_cost`` on every node."""
    return Executor(db, costs, row_limit).run(plan)[1]
