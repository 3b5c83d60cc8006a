"""Node features and width-first batches.

Every node gets four inputs: an operator one-hot (O), a metadata bitmap over
tables ++ columns ++ indexes (M), its predicate as a code sequence (P), and a
sample bitmap (B, scan nodes only).  A batch groups nodes by depth so the
model can evaluate one tree level of the whole batch at a time.

Predicate leaf code layout, for C catalog columns and string width d_s::

    [column one-hot C | operator one-hot 7 | numeric 1 | string d_s | is_string 1 | operand column one-hot C]

Sequence codes append three flags ``[AND, OR, EMPTY]`` to that layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .catalog import CatalogError, SampleStore, SchemaCatalog
from .plan import OPERATORS, PREDICATE_OPERATORS, ColumnRef, PlanNode, PredicateNode
from .predicates import evaluate

MAX_PREDICATE_CODES = 32
_OP_POS = {op: i for i, op in enumerate(OPERATORS)}
_PRED_OP_POS = {op: i for i, op in enumerate(PREDICATE_OPERATORS)}


class FeatureError(ValueError):
    pass


class StringEncoder(Protocol):
    dim: int

    def encode(self, operand: str) -> np.ndarray: ...


class ZeroStringEncoder:
    """Placeholder for workloads without string predicates."""

    name = "none"

    def __init__(self, dim: int = 64):
        self.dim = dim

    def encode(self, operand: str) -> np.ndarray:
        return np.zeros(self.dim, dtype=np.float32)


# ------------------------------------------------------------ basic encoders


def encode_operation(op: str) -> np.ndarray:
    if op not in _OP_POS:
        raise FeatureError(f"unknown operator kind {op!r}")
    v = np.zeros(len(OPERATORS), dtype=np.float32)
    v[_OP_POS[op]] = 1.0
    return v


def resolve_column(name: str, catalog: SchemaCatalog, table: str | None = None) -> str:
    if name in catalog.column_pos:
        return name
    if table is not None and f"{table}.{name}" in catalog.column_pos:
        return f"{table}.{name}"
    raise CatalogError(f"unknown column {name!r}")


def metadata_width(catalog: SchemaCatalog) -> int:
    return len(catalog.tables) + len(catalog.columns) + len(catalog.indexes)


def encode_metadata(node: PlanNode, catalog: SchemaCatalog) -> np.ndarray:
    nt, nc = len(catalog.tables), len(catalog.columns)
    v = np.zeros(metadata_width(catalog), dtype=np.float32)
    cols = set(node.columns)
    if node.predicate is not None:
        cols |= node.predicate.columns()
    tables = set() if node.table is None else {node.table}
    for c in cols:
        full = resolve_column(c, catalog, node.table)
        v[nt + catalog.column_pos[full]] = 1.0
        tables.add(catalog.column(full).table)
    for t in tables:
        if t not in catalog.table_pos:
            raise CatalogError(f"unknown table {t!r}")
        v[catalog.table_pos[t]] = 1.0
    if node.index is not None:
        if node.index not in catalog.index_pos:
            raise CatalogError(f"unknown index {node.index!r}")
        v[nt + nc + catalog.index_pos[node.index]] = 1.0
    return v


def normalize_numeric(v: float, lo: float, hi: float) -> float:
    if hi == lo:
        return 0.5
    return float(min(1.0, max(0.0, (v - lo) / (hi - lo))))


# ------------------------------------------------------------ predicates


@dataclass(frozen=True)
class CodeLayout:
    n_columns: int
    string_dim: int

    @property
    def leaf_width(self) -> int:
        return 2 * self.n_columns + len(PREDICATE_OPERATORS) + self.string_dim + 2

    @property
    def code_width(self) -> int:
        return self.leaf_width + 3

    @property
    def flag_and(self) -> int:
        return self.leaf_width

    @property
    def flag_or(self) -> int:
        return self.leaf_width + 1

    @property
    def flag_empty(self) -> int:
        return self.leaf_width + 2


def encode_leaf(p: PredicateNode, catalog: SchemaCatalog, enc: StringEncoder, table: str | None = None) -> np.ndarray:
    layout = CodeLayout(len(catalog.columns), enc.dim)
    c = len(catalog.columns)
    k = len(PREDICATE_OPERATORS)
    v = np.zeros(layout.leaf_width, dtype=np.float32)
    col = resolve_column(p.column, catalog, table)
    v[catalog.column_pos[col]] = 1.0
    if p.operator not in _PRED_OP_POS:
        raise FeatureError(f"unknown predicate operator {p.operator!r}")
    v[c + _PRED_OP_POS[p.operator]] = 1.0
    num, s0 = c + k, c + k + 1
    flag = s0 + enc.dim
    operand = p.operand
    info = catalog.column(col)
    if isinstance(operand, ColumnRef):
        other = resolve_column(operand.name, catalog, table)
        v[flag + 1 + catalog.column_pos[other]] = 1.0
    elif isinstance(operand, str):
        if info.kind != "string":
            raise FeatureError(f"string operand {operand!r} on numeric column {col}")
        v[s0:flag] = enc.encode(operand)
        v[flag] = 1.0
    else:
        if info.kind != "numeric":
            raise FeatureError(f"numeric operand {operand!r} on string column {col}")
        v[num] = normalize_numeric(float(operand), info.min, info.max)
    return v


def serialize_predicate(p: PredicateNode, leaf_code, layout: CodeLayout) -> np.ndarray:
    """DFS code sequence with one EMPTY code appended after each non-root subtree.

    ``leaf_code(leaf)`` returns the leaf's code of width ``layout.leaf_width``.
    """
    rows: list[np.ndarray] = []

    def flag(i: int) -> np.ndarray:
        v = np.zeros(layout.code_width, dtype=np.float32)
        v[i] = 1.0
        return v

    def visit(node: PredicateNode, root: bool):
        if node.is_leaf:
            v = np.zeros(layout.code_width, dtype=np.float32)
            v[: layout.leaf_width] = leaf_code(node)
            rows.append(v)
        else:
            if len(node.children) != 2:
                raise FeatureError("predicate must be binarized before serialization")
            rows.append(flag(layout.flag_and if node.kind == "and" else layout.flag_or))
            visit(node.children[0], False)
            visit(node.children[1], False)
        if not root:
            rows.append(flag(layout.flag_empty))

    visit(p, True)
    if len(rows) > MAX_PREDICATE_CODES:
        raise FeatureError(f"predicate needs {len(rows)} codes, cap is {MAX_PREDICATE_CODES}")
    return np.stack(rows)


def deserialize_predicate(codes: np.ndarray, layout: CodeLayout):
    """Inverse of :func:`serialize_predicate` up to leaf codes.

    Returns nested tuples ``("and"|"or", left, right)`` with leaves given as
    row indices into ``codes``.
    """
    pos = 0

    def take(root: bool):
        nonlocal pos
        if pos >= len(codes):
            raise FeatureError("truncated predicate sequence")
        row = codes[pos]
        i = pos
        pos += 1
        if row[layout.flag_empty]:
            raise FeatureError(f"unexpected EMPTY code at {i}")
        if row[layout.flag_and] or row[layout.flag_or]:
            kind = "and" if row[layout.flag_and] else "or"
            node = (kind, take(False), take(False))
        else:
            node = i
        if not root:
            if pos >= len(codes) or not codes[pos][layout.flag_empty]:
                raise FeatureError(f"missing EMPTY code after position {i}")
            pos += 1
        return node

    tree = take(True)
    if pos != len(codes):
        raise FeatureError("trailing codes after predicate")
    return tree


def compute_sample_bitmap(p: PredicateNode, table: str, store: SampleStore) -> np.ndarray:
    if table not in store.columns:
        raise CatalogError(f"no sample for table {table!r}")
    cols = store.columns[table]
    n = store.sample_count(table)
    out = np.zeros(store.size, dtype=np.float32)
    out[:n] = evaluate(p, cols, n)
    return out


# ------------------------------------------------------------ node / tree


@dataclass
class NodeFeatures:
    op: np.ndarray
    meta: np.ndarray
    bitmap: np.ndarray
    predicate: np.ndarray | None  # code sequence, None when absent


@dataclass
class EncodedNode:
    features: NodeFeatures
    left: "EncodedNode | None"
    right: "EncodedNode | None"
    card: float
    cost: float
    plan: PlanNode


@dataclass
class Featurizer:
    catalog: SchemaCatalog
    store: SampleStore
    encoder: StringEncoder = field(default_factory=ZeroStringEncoder)

    @property
    def layout(self) -> CodeLayout:
        return CodeLayout(len(self.catalog.columns), self.encoder.dim)

    @property
    def widths(self) -> dict[str, int]:
        return {
            "op": len(OPERATORS),
            "meta": metadata_width(self.catalog),
            "bitmap": self.store.size,
            "code": self.layout.code_width,
            "n_columns": len(self.catalog.columns),
            "string_dim": self.encoder.dim,
        }

    def qualify(self, p: PredicateNode, table: str | None) -> PredicateNode:
        """Predicate with fully qualified column names."""
        if p.is_leaf:
            opnd = p.operand
            if isinstance(opnd, ColumnRef):
                opnd = ColumnRef(resolve_column(opnd.name, self.catalog, table))
            return PredicateNode("expr", resolve_column(p.column, self.catalog, table), p.operator, opnd)
        return PredicateNode(p.kind, children=tuple(self.qualify(c, table) for c in p.children))

    def node_features(self, node: PlanNode) -> NodeFeatures:
        pred = None
        bitmap = np.zeros(self.store.size, dtype=np.float32)
        if node.predicate is not None:
            q = self.qualify(node.predicate, node.table)
            pred = serialize_predicate(q, lambda leaf: encode_leaf(leaf, self.catalog, self.encoder, node.table), self.layout)
            if node.is_scan and node.table is not None:
                bitmap = compute_sample_bitmap(q, node.table, self.store)
        return NodeFeatures(encode_operation(node.op), encode_metadata(node, self.catalog), bitmap, pred)

    def encode_tree(self, tree: PlanNode) -> EncodedNode:
        def rec(n: PlanNode | None) -> EncodedNode | None:
            if n is None:
                return None
            kids = list(n.children) + [None] * (2 - len(n.children))
            if len(kids) > 2:
                raise FeatureError("plan must be binarized before encoding")
            return EncodedNode(
                self.node_features(n),
                rec(kids[0]),
                rec(kids[1]),
                np.nan if n.true_card is None else float(n.true_card),
                np.nan if n.true_cost is None else float(n.true_cost),
                n,
            )

        return rec(tree)

    def encode_plan_batch(self, trees: Sequence[PlanNode]) -> "EncodedPlanBatch":
        return collate([self.encode_tree(t) for t in trees], self.layout, self.widths)


# ------------------------------------------------------------ batches


@dataclass
class PredicateProgram:
    """Batched pooling schedule for every predicate in a batch.

    Slots ``0..len(leaf_codes)-1`` are leaves; each group appends its
    outputs as new slots, so later groups can refer to earlier ones.
    """

    leaf_codes: np.ndarray
    groups: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # left slot, right slot, is_and


@dataclass
class Level:
    op: np.ndarray
    meta: np.ndarray
    bitmap: np.ndarray
    pred_slot: np.ndarray  # -1 for no predicate
    left: np.ndarray  # row in the next level, -1 for none
    right: np.ndarray
    tree: np.ndarray
    card: np.ndarray
    cost: np.ndarray

    def __len__(self) -> int:
        return len(self.tree)


@dataclass
class EncodedPlanBatch:
    levels: list[Level]
    program: PredicateProgram
    n_trees: int
    nodes: list[list[EncodedNode]] = field(repr=False, default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def edges(self) -> list[np.ndarray]:
        return [np.stack([lv.left, lv.right], axis=1) for lv in self.levels]

    def root_labels(self) -> tuple[np.ndarray, np.ndarray]:
        return self.levels[0].card, self.levels[0].cost

    def n_nodes(self) -> int:
        return sum(len(lv) for lv in self.levels)


def _program(per_node: list[tuple[int, np.ndarray | None]], layout: CodeLayout):
    """Leaf codes plus height-ordered pooling groups for all predicates."""
    leaf_rows: list[np.ndarray] = []
    by_height: dict[int, list] = {}
    roots = np.full(len(per_node), -1, dtype=np.int64)
    pending = []  # (node position, tree-with-leaf-slots)

    def place(t, codes):
        if isinstance(t, int):
            leaf_rows.append(codes[t][: layout.code_width])
            return ("leaf", len(leaf_rows) - 1), 0
        kind, l, r = t
        lp, lh = place(l, codes)
        rp, rh = place(r, codes)
        h = max(lh, rh) + 1
        ref = ["node", None]
        by_height.setdefault(h, []).append((ref, lp, rp, kind == "and"))
        return ref, h

    for pos, codes in per_node:
        if codes is None:
            continue
        pending.append((pos, place(deserialize_predicate(codes, layout), codes)[0]))
    n_leaves = len(leaf_rows)
    next_slot = n_leaves

    def slot(x):
        return x[1]

    groups = []
    for h in sorted(by_height):
        items = by_height[h]
        left = np.array([slot(lp) for _, lp, _, _ in items], dtype=np.int64)
        right = np.array([slot(rp) for _, _, rp, _ in items], dtype=np.int64)
        is_and = np.array([a for *_, a in items], dtype=bool)
        for ref, *_ in items:
            ref[1] = next_slot
            next_slot += 1
        groups.append((left, right, is_and))
    for pos, ref in pending:
        roots[pos] = slot(ref)
    leaf_codes = np.stack(leaf_rows) if leaf_rows else np.zeros((0, layout.code_width), dtype=np.float32)
    return PredicateProgram(leaf_codes.astype(np.float32), groups), roots


def collate(trees: Sequence[EncodedNode], layout: CodeLayout, widths: dict[str, int]) -> EncodedPlanBatch:
    """Group nodes by depth; child edges index rows of the next level."""
    levels_nodes: list[list[EncodedNode]] = []
    trees_of: list[list[int]] = []
    frontier = [(t, i) for i, t in enumerate(trees)]
    while frontier:
        levels_nodes.append([n for n, _ in frontier])
        trees_of.append([i for _, i in frontier])
        nxt = []
        for n, i in frontier:
            for c in (n.left, n.right):
                if c is not None:
                    nxt.append((c, i))
        frontier = nxt

    flat = [(d, j) for d, lv in enumerate(levels_nodes) for j in range(len(lv))]
    per_node = [(k, levels_nodes[d][j].features.predicate) for k, (d, j) in enumerate(flat)]
    program, roots = _program(per_node, layout)

    levels = []
    k = 0
    for d, nodes in enumerate(levels_nodes):
        n = len(nodes)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        if d + 1 < len(levels_nodes):
            pos_next = {id(x): i for i, x in enumerate(levels_nodes[d + 1])}
            for j, nd in enumerate(nodes):
                if nd.left is not None:
                    left[j] = pos_next[id(nd.left)]
                if nd.right is not None:
                    right[j] = pos_next[id(nd.right)]

        def stack(attr, w):
            if not n:
                return np.zeros((0, w), dtype=np.float32)
            return np.stack([getattr(x.features, attr) for x in nodes]).astype(np.float32)

        levels.append(
            Level(
                op=stack("op", widths["op"]),
                meta=stack("meta", widths["meta"]),
                bitmap=stack("bitmap", widths["bitmap"]),
                pred_slot=roots[k: k + n].copy(),
                left=left,
                right=right,
                tree=np.array(trees_of[d], dtype=np.int64),
                card=np.array([x.card for x in nodes], dtype=np.float64),
                cost=np.array([x.cost for x in nodes], dtype=np.float64),
            )
        )
        k += n
    return EncodedPlanBatch(levels, program, len(trees), levels_nodes)
