"""In-memory query plans and predicate trees.

Plans arrive as JSON documents (see ``docs/plan_format.md``).  Parsing
validates arity, eliminates ``NOT`` and ``IN`` so that predicate trees only
contain AND / OR / EXPR nodes, and clamps labels so q-error stays defined.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, Union

OPERATORS: tuple[str, ...] = (
    "Aggregate",
    "Sort",
    "HashJoin",
    "MergeJoin",
    "NestedLoopJoin",
    "SeqScan",
    "IndexScan",
    "IndexOnlyScan",
    "BitmapHeapScan",
    "BitmapIndexScan",
    "HashAggregate",
    "PlainAggregate",
    "HashSort",
    "MergeSort",
)
SCAN_OPS = frozenset({"SeqScan", "IndexScan", "IndexOnlyScan", "BitmapHeapScan", "BitmapIndexScan"})
JOIN_OPS = frozenset({"HashJoin", "MergeJoin", "NestedLoopJoin"})
UNARY_OPS = frozenset({"Aggregate", "Sort", "HashAggregate", "PlainAggregate", "HashSort", "MergeSort"})
AGGREGATE_OPS = frozenset({"Aggregate", "HashAggregate", "PlainAggregate"})

# IN is accepted on input but rewritten away; the slot stays in the encoding.
PREDICATE_OPERATORS: tuple[str, ...] = ("=", "!=", ">", "<", "LIKE", "NOT LIKE", "IN")

CARD_FLOOR = 1.0
COST_FLOOR = 1e-3

_OPERATOR_ALIASES = {
    "<>": "!=",
    "==": "=",
    "like": "LIKE",
    "not like": "NOT LIKE",
    "not_like": "NOT LIKE",
    "in": "IN",
}


class PlanError(ValueError):
    """Raised for malformed plan documents."""


class PlanSyntaxError(PlanError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ColumnRef:
    """Right-hand side of a column-to-column comparison (join condition)."""

    name: str


Operand = Union[float, int, str, ColumnRef, tuple]


@dataclass(frozen=True)
class PredicateNode:
    kind: str  # "and" | "or" | "expr"
    column: str | None = None
    operator: str | None = None
    operand: Any = None
    children: tuple["PredicateNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.kind == "expr"

    def leaves(self) -> Iterator["PredicateNode"]:
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def columns(self) -> set[str]:
        out = set()
        for leaf in self.leaves():
            out.add(leaf.column)
            if isinstance(leaf.operand, ColumnRef):
                out.add(leaf.operand.name)
        return out


def expr(column: str, operator: str, operand: Any) -> PredicateNode:
    return PredicateNode("expr", column, operator, operand)


def and_(*children: PredicateNode) -> PredicateNode:
    return PredicateNode("and", children=tuple(children))


def or_(*children: PredicateNode) -> PredicateNode:
    return PredicateNode("or", children=tuple(children))


def qualify_predicate(p: PredicateNode, table: str) -> PredicateNode:
    """Prefix bare column names with ``table`` (scan predicates may omit it)."""
    if p.kind != "expr":
        return PredicateNode(p.kind, children=tuple(qualify_predicate(c, table) for c in p.children))
    name = lambda c: c if "." in c else f"{table}.{c}"  # noqa: E731
    operand = ColumnRef(name(p.operand.name)) if isinstance(p.operand, ColumnRef) else p.operand
    return PredicateNode("expr", name(p.column), p.operator, operand)


@dataclass(frozen=True)
class PlanNode:
    """One physical operator.

    ``children`` holds ``PlanNode`` objects; after :func:`binarize` a unary
    operator carries ``None`` as its explicit empty right child.
    """

    op: str
    table: str | None = None
    index: str | None = None
    columns: tuple[str, ...] = ()
    predicate: PredicateNode | None = None
    children: tuple["PlanNode | None", ...] = ()
    true_card: float | None = field(default=None, compare=False)
    true_cost: float | None = field(default=None, compare=False)

    @property
    def is_scan(self) -> bool:
        return self.op in SCAN_OPS

    @property
    def is_join(self) -> bool:
        return self.op in JOIN_OPS

    @property
    def inputs(self) -> tuple["PlanNode", ...]:
        return tuple(c for c in self.children if c is not None)

    def walk(self) -> Iterator["PlanNode"]:
        """Pre-order traversal over real (non-empty) nodes."""
        yield self
        for c in self.inputs:
            yield from c.walk()

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.inputs), default=0)

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def tables(self) -> set[str]:
        out = set()
        for n in self.walk():
            if n.table is not None:
                out.add(n.table)
        return out

    def with_labels(self, card: float | None, cost: float | None) -> "PlanNode":
        return replace(self, true_card=_clamp_card(card), true_cost=_clamp_cost(cost))


# A plan file holds exactly one tree; the root node stands for it.
PlanTree = PlanNode


def _clamp_card(v: float | None) -> float | None:
    if v is None:
        return None
    if v < 0 or math.isnan(v):
        raise PlanError(f"true_card must be nonnegative, got {v}")
    return max(CARD_FLOOR, float(v))


def _clamp_cost(v: float | None) -> float | None:
    if v is None:
        return None
    if v < 0 or math.isnan(v):
        raise PlanError(f"true_cost must be nonnegative, got {v}")
    return max(COST_FLOOR, float(v))


# ---------------------------------------------------------------- predicates


def _normalize_operator(op: Any) -> str:
    if not isinstance(op, str):
        raise PlanError(f"predicate operator must be a string, got {op!r}")
    op = _OPERATOR_ALIASES.get(op.strip().lower(), op.strip().upper())
    if op not in PREDICATE_OPERATORS:
        raise PlanError(f"unknown predicate operator {op!r}")
    return op


def _parse_operand(raw: Any) -> Operand:
    if isinstance(raw, bool) or raw is None:
        raise PlanError(f"invalid operand {raw!r}")
    if isinstance(raw, (int, float)):
        if not math.isfinite(raw):
            raise PlanError("operand must be finite")
        return raw
    if isinstance(raw, str):
        return raw
    if isinstance(raw, dict) and set(raw) == {"column"}:
        return ColumnRef(str(raw["column"]))
    if isinstance(raw, list):
        if not raw or not all(isinstance(v, (str, int, float)) and not isinstance(v, bool) for v in raw):
            raise PlanError("IN operand must be a nonempty list of scalars")
        return tuple(raw)
    raise PlanError(f"invalid operand {raw!r}")


def _predicate_from_obj(obj: Any, path: str) -> PredicateNode:
    if not isinstance(obj, dict):
        raise PlanError(f"{path}: predicate must be an object")
    kind = str(obj.get("kind", "expr")).lower()
    if kind in ("and", "or"):
        kids = obj.get("children") or []
        if len(kids) < 2:
            raise PlanError(f"{path}: {kind.upper()} needs at least two children")
        return PredicateNode(kind, children=tuple(
            _predicate_from_obj(k, f"{path}.children[{i}]") for i, k in enumerate(kids)))
    if kind == "not":
        kids = obj.get("children") or []
        if len(kids) != 1:
            raise PlanError(f"{path}: NOT takes exactly one child")
        return negate(_predicate_from_obj(kids[0], f"{path}.children[0]"))
    if kind != "expr":
        raise PlanError(f"{path}: unknown predicate kind {kind!r}")
    column = obj.get("column")
    if not column or not isinstance(column, str):
        raise PlanError(f"{path}: predicate referencing no column")
    if "operand" not in obj:
        raise PlanError(f"{path}: predicate without operand")
    op = _normalize_operator(obj.get("operator"))
    operand = _parse_operand(obj["operand"])
    if op == "IN" or isinstance(operand, tuple):
        if op != "IN":
            raise PlanError(f"{path}: list operand requires IN")
        values = operand if isinstance(operand, tuple) else (operand,)
        return _balanced("or", [expr(column, "=", v) for v in values])
    if op in ("LIKE", "NOT LIKE") and not isinstance(operand, str):
        raise PlanError(f"{path}: {op} requires a string operand")
    return expr(column, op, operand)


def _balanced(kind: str, items: list[PredicateNode]) -> PredicateNode:
    if len(items) == 1:
        return items[0]
    mid = (len(items) + 1) // 2
    return PredicateNode(kind, children=(_balanced(kind, items[:mid]), _balanced(kind, items[mid:])))


_NEGATED = {"=": "!=", "!=": "=", "LIKE": "NOT LIKE", "NOT LIKE": "LIKE"}


def negate(p: PredicateNode) -> PredicateNode:
    """Push a logical NOT through ``p`` so that no NOT node is needed."""
    if p.kind == "and":
        return PredicateNode("or", children=tuple(negate(c) for c in p.children))
    if p.kind == "or":
        return PredicateNode("and", children=tuple(negate(c) for c in p.children))
    if p.operator in _NEGATED:
        return replace(p, operator=_NEGATED[p.operator])
    if p.operator == ">":  # x <= v
        return or_(expr(p.column, "<", p.operand), expr(p.column, "=", p.operand))
    if p.operator == "<":  # x >= v
        return or_(expr(p.column, ">", p.operand), expr(p.column, "=", p.operand))
    if p.operator == "IN":
        values = p.operand if isinstance(p.operand, tuple) else (p.operand,)
        return _balanced("and", [expr(p.column, "!=", v) for v in values])
    raise PlanError(f"cannot negate operator {p.operator!r}")


def _predicate_to_obj(p: PredicateNode) -> dict:
    if p.kind != "expr":
        return {"kind": p.kind, "children": [_predicate_to_obj(c) for c in p.children]}
    operand = p.operand
    if isinstance(operand, ColumnRef):
        operand = {"column": operand.name}
    elif isinstance(operand, tuple):
        operand = list(operand)
    return {"kind": "expr", "column": p.column, "operator": p.operator, "operand": operand}


# ---------------------------------------------------------------- plan nodes


def _node_from_obj(obj: Any, path: str) -> PlanNode:
    if not isinstance(obj, dict):
        raise PlanError(f"{path}: plan node must be an object")
    op = obj.get("op")
    if op not in OPERATORS:
        raise PlanError(f"{path}: unknown operator kind {op!r}")
    raw_children = obj.get("children") or []
    if not isinstance(raw_children, list):
        raise PlanError(f"{path}: children must be an array")
    children = tuple(
        None if c is None else _node_from_obj(c, f"{path}.children[{i}]")
        for i, c in enumerate(raw_children))
    pred = obj.get("predicate")
    cols = obj.get("columns") or []
    if not isinstance(cols, list) or not all(isinstance(c, str) for c in cols):
        raise PlanError(f"{path}: columns must be an array of strings")
    node = PlanNode(
        op=op,
        table=obj.get("table"),
        index=obj.get("index"),
        columns=tuple(sorted(set(cols))),
        predicate=None if pred is None else _predicate_from_obj(pred, f"{path}.predicate"),
        children=children,
        true_card=_clamp_card(obj.get("true_card")),
        true_cost=_clamp_cost(obj.get("true_cost")),
    )
    _validate_node(node, path)
    return node


def _validate_node(node: PlanNode, path: str) -> None:
    n_in = len(node.inputs)
    if node.op in SCAN_OPS:
        if not node.table:
            raise PlanError(f"{path}: scan requires a table")
        if n_in:
            raise PlanError(f"{path}: scan takes no inputs")
    elif node.op in JOIN_OPS:
        if n_in < 2:
            raise PlanError(f"{path}: join requires two inputs")
        if len(node.children) != n_in:
            raise PlanError(f"{path}: join inputs cannot be empty")
    else:
        if n_in != 1 or node.children[0] is None:
            raise PlanError(f"{path}: {node.op} requires exactly one input")


def validate(tree: PlanNode) -> None:
    for i, n in enumerate(tree.walk()):
        _validate_node(n, f"node[{i}]")


def parse_plan(text: str) -> PlanTree:
    """Parse one plan document into a validated tree."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise PlanSyntaxError(e.msg, e.lineno, e.colno) from None
    if isinstance(obj, dict) and "plan" in obj and "op" not in obj:
        obj = obj["plan"]
    return _node_from_obj(obj, "plan")


def plan_to_obj(node: PlanNode, labels: bool = True) -> dict:
    out: dict[str, Any] = {"op": node.op}
    if node.table is not None:
        out["table"] = node.table
    if node.index is not None:
        out["index"] = node.index
    if node.columns:
        out["columns"] = list(node.columns)
    if node.predicate is not None:
        out["predicate"] = _predicate_to_obj(node.predicate)
    if node.children:
        out["children"] = [None if c is None else plan_to_obj(c, labels) for c in node.children]
    if labels:
        if node.true_card is not None:
            out["true_card"] = node.true_card
        if node.true_cost is not None:
            out["true_cost"] = node.true_cost
    return out


def serialize_plan(node: PlanNode, indent: int | None = 1) -> str:
    return json.dumps(plan_to_obj(node), indent=indent, ensure_ascii=False)


# ---------------------------------------------------------------- binarization


def binarize_predicate(p: PredicateNode) -> PredicateNode:
    if p.is_leaf:
        return p
    kids = [binarize_predicate(c) for c in p.children]
    acc = kids[0]
    for k in kids[1:]:
        acc = PredicateNode(p.kind, children=(acc, k))
    return acc


def binarize(tree: PlanNode) -> PlanNode:
    """Return an equivalent tree whose internal nodes all have two slots.

    k-ary joins and predicates nest left-deep; unary operators get ``None``
    as the empty right child.
    """
    pred = None if tree.predicate is None else binarize_predicate(tree.predicate)
    kids = [binarize(c) for c in tree.inputs]
    if tree.op in JOIN_OPS and len(kids) > 2:
        acc = kids[0]
        for k in kids[1:-1]:
            acc = PlanNode(op=tree.op, children=(acc, k))
        kids = [acc, kids[-1]]
    if len(kids) == 1:
        children: tuple = (kids[0], None)
    else:
        children = tuple(kids)
    return replace(tree, predicate=pred, children=children)


def is_binary(tree: PlanNode) -> bool:
    for n in tree.walk():
        if n.op not in SCAN_OPS and len(n.children) != 2:
            return False
        if n.predicate is not None:
            for leaf_parent in _pred_nodes(n.predicate):
                if not leaf_parent.is_leaf and len(leaf_parent.children) != 2:
                    return False
    return True


def _pred_nodes(p: PredicateNode) -> Iterator[PredicateNode]:
    yield p
    for c in p.children:
        yield from _pred_nodes(c)


# ---------------------------------------------------------------- hashing


def _canonical_operand(v: Any) -> Any:
    if isinstance(v, ColumnRef):
        return {"c": v.name}
    if isinstance(v, str):
        return {"s": v}
    if isinstance(v, tuple):
        return {"l": [_canonical_operand(x) for x in v]}
    return {"n": repr(float(v))}


def _canonical_pred(p: PredicateNode) -> Any:
    if p.is_leaf:
        return ["x", p.column, p.operator, _canonical_operand(p.operand)]
    return [p.kind, [_canonical_pred(c) for c in p.children]]


def _canonical(node: PlanNode | None) -> Any:
    if node is None:
        return None
    return [
        node.op,
        node.table,
        node.index,
        list(node.columns),
        None if node.predicate is None else _canonical_pred(node.predicate),
        [_canonical(c) for c in node.children],
    ]


def canonical_string(node: PlanNode) -> str:
    """Label-free, key-ordered serialization used for hashing."""
    return json.dumps(_canonical(node), separators=(",", ":"), ensure_ascii=False)


def canonical_hash(node: PlanNode) -> bytes:
    return hashlib.sha256(canonical_string(node).encode("utf-8")).digest()
