"""Random query plans over a database's join graph.

Each query picks a connected set of tables, puts a random AND/OR predicate
on every scan, joins the scans left-deep in breadth-first join-graph order
and may add a Sort or Aggregate on top.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..catalog import Database
from ..plan import ColumnRef, PlanNode, PredicateNode, _balanced, and_, expr, or_

NUMERIC_OPS = (">", "<", "=", "!=")
STRING_OPS = ("=", "!=", "LIKE", "NOT LIKE", "IN")


@dataclass
class WorkloadConfig:
    n_queries: int = 1000
    tables: tuple[int, int] = (1, 2)  # inclusive range of joined tables
    numeric_predicates: tuple[int, int] = (1, 2)  # per scan
    string_predicates: tuple[int, int] = (0, 1)
    numeric_mix: dict[str, float] = field(default_factory=lambda: {">": 0.35, "<": 0.35, "=": 0.2, "!=": 0.1})
    string_mix: dict[str, float] = field(default_factory=lambda: {"=": 0.15, "!=": 0.05, "LIKE": 0.6, "NOT LIKE": 0.1, "IN": 0.1})
    or_probability: float = 0.25
    root_probability: float = 0.2
    join_ops: tuple[str, ...] = ("HashJoin",)
    scan_ops: tuple[str, ...] = ("SeqScan",)
    seed: int = 0


_WORD = re.compile(r"[A-Za-z]+|[0-9]+")


def like_operand(value: str, rng: np.random.Generator) -> str:
    """A LIKE pattern built from a piece of an existing value."""
    words = [m for m in _WORD.finditer(value)]
    if not words:
        return f"%{value}%"
    m = words[int(rng.integers(len(words)))]
    w = m.group(0)
    cut = int(rng.integers(min(2, len(w)), len(w) + 1))
    shape = int(rng.integers(3))
    if shape == 0 and m.start() == 0:
        return f"{w[:cut]}%"
    if shape == 1 and m.end() == len(value):
        return f"%{w[len(w) - cut:]}"
    return f"%{w[:cut]}%"


class QueryGenerator:
    def __init__(self, db: Database, cfg: WorkloadConfig):
        self.db = db
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.operator_counts: Counter = Counter()  # keyed by ("numeric" | "string", operator)
        cat = db.catalog
        keys = {t.primary_key for t in cat.tables} | {c for edge in cat.joins for c in edge}
        self.numeric = {
            t.name: [c.name for c in cat.columns_of(t.name) if c.kind == "numeric" and c.name not in keys]
            for t in cat.tables
        }
        self.strings = {t.name: [c.name for c in cat.columns_of(t.name) if c.kind == "string"] for t in cat.tables}

    def _pick(self, mix: dict[str, float]) -> str:
        ops = list(mix)
        p = np.array([mix[o] for o in ops], dtype=np.float64)
        return ops[int(self.rng.choice(len(ops), p=p / p.sum()))]

    def _value(self, col: str):
        v = self.db.column(col)
        return v[int(self.rng.integers(len(v)))]

    def _numeric_leaf(self, col: str) -> PredicateNode:
        op = self._pick(self.cfg.numeric_mix)
        self.operator_counts["numeric", op] += 1
        return expr(col, op, int(self._value(col)))

    def _string_leaf(self, col: str) -> PredicateNode:
        op = self._pick(self.cfg.string_mix)
        self.operator_counts["string", op] += 1
        if op in ("LIKE", "NOT LIKE"):
            return expr(col, op, like_operand(str(self._value(col)), self.rng))
        if op == "IN":
            vals = sorted({str(self._value(col)) for _ in range(int(self.rng.integers(2, 4)))})
            if len(vals) == 1:
                return expr(col, "=", vals[0])
            return _balanced("or", [expr(col, "=", v) for v in vals])
        return expr(col, op, str(self._value(col)))

    def _scan_predicate(self, table: str) -> PredicateNode | None:
        lo, hi = self.cfg.numeric_predicates
        slo, shi = self.cfg.string_predicates
        leaves = []
        num = self.numeric[table]
        if num:
            k = int(self.rng.integers(lo, hi + 1))
            for c in self.rng.choice(num, size=min(k, len(num)), replace=False):
                leaves.append(self._numeric_leaf(str(c)))
        strs = self.strings[table]
        if strs:
            k = int(self.rng.integers(slo, shi + 1))
            for c in self.rng.choice(strs, size=min(k, len(strs)), replace=False):
                leaves.append(self._string_leaf(str(c)))
        if not leaves:
            return None
        acc = leaves[0]
        for leaf in leaves[1:]:
            acc = or_(acc, leaf) if self.rng.random() < self.cfg.or_probability else and_(acc, leaf)
        return acc

    def _tables(self) -> list[str]:
        cat = self.db.catalog
        lo, hi = self.cfg.tables
        k = int(self.rng.integers(lo, hi + 1))
        names = [t.name for t in cat.tables]
        order = [names[int(self.rng.integers(len(names)))]]
        while len(order) < k:
            frontier = sorted({n for t in order for n in cat.neighbours(t)} - set(order))
            if not frontier:
                break
            order.append(frontier[int(self.rng.integers(len(frontier)))])
        return order

    def one(self) -> PlanNode:
        cat = self.db.catalog
        tables = self._tables()
        plan: PlanNode | None = None
        joined: list[str] = []
        for t in tables:
            op = self.cfg.scan_ops[int(self.rng.integers(len(self.cfg.scan_ops)))]
            scan = PlanNode(op, table=t, predicate=self._scan_predicate(t))
            if plan is None:
                plan = scan
            else:
                partner = next(j for j in joined if cat.join_condition(j, t))
                a, b = cat.join_condition(partner, t)
                op = self.cfg.join_ops[int(self.rng.integers(len(self.cfg.join_ops)))]
                plan = PlanNode(op, predicate=expr(a, "=", ColumnRef(b)), children=(plan, scan))
            joined.append(t)
        r = self.rng.random()
        if r < self.cfg.root_probability / 2:
            plan = PlanNode("Aggregate", children=(plan, None))
        elif r < self.cfg.root_probability:
            key = self.numeric[tables[0]][0] if self.numeric[tables[0]] else f"{tables[0]}.id"
            plan = PlanNode("Sort", columns=(key,), children=(plan, None))
        return plan

    def generate(self) -> list[PlanNode]:
        return [self.one() for _ in range(self.cfg.n_queries)]


def generate_queries(db: Database, cfg: WorkloadConfig) -> list[PlanNode]:
    return QueryGenerator(db, cfg).generate()
