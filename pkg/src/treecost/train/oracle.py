"""Row-at-a-time brute-force evaluator used to cross-check the executor.

Deliberately naive: Python dictionaries per row, nested-loop joins, and a
recursive LIKE matcher that shares no code with the vectorised path.
"""

from __future__ import annotations

from ..catalog import Database
from ..plan import AGGREGATE_OPS, ColumnRef, JOIN_OPS, PlanNode, PredicateNode, SCAN_OPS, qualify_predicate
from .executor import DEFAULT_COSTS, UnitCosts, operator_cost


def like(value: str, pattern: str) -> bool:
    if not pattern:
        return not value
    head = pattern[0]
    if head == "%":
        return any(like(value[i:], pattern[1:]) for i in range(len(value) + 1))
    if not value:
        return False
    if head == "_" or head == value[0]:
        return like(value[1:], pattern[1:])
    return False


def holds(p: PredicateNode, row: dict) -> bool:
    if p.kind == "and":
        return all(holds(c, row) for c in p.children)
    if p.kind == "or":
        return any(holds(c, row) for c in p.children)
    x = row[p.column]
    v = row[p.operand.name] if isinstance(p.operand, ColumnRef) else p.operand
    op = p.operator
    if op == "=":
        return x == v
    if op == "!=":
        return x != v
    if op == ">":
        return x > v
    if op == "<":
        return x < v
    if op == "LIKE":
        return like(x, v)
    if op == "NOT LIKE":
        return not like(x, v)
    raise ValueError(f"operator {op} cannot be evaluated")


def _rows(db: Database, table: str) -> list[dict]:
    cols = db.tables[table]
    n = db.rows(table)
    names = list(cols)
    return [{c: cols[c][i].item() if hasattr(cols[c][i], "item") else cols[c][i] for c in names} for i in range(n)]


def brute_force(plan: PlanNode, db: Database, costs: UnitCosts = DEFAULT_COSTS) -> list[tuple[int, float]]:
    """(card, cost) for every node in pre-order (cards unclamped)."""
    cache: dict[str, list[dict]] = {}
    out: list[tuple[int, float]] = []

    def run(node: PlanNode) -> tuple[list[dict], float]:
        slot = len(out)
        out.append((0, 0.0))
        kids = [run(c) for c in node.inputs]
        if node.op in SCAN_OPS:
            if node.table not in cache:
                cache[node.table] = _rows(db, node.table)
            pred = None if node.predicate is None else qualify_predicate(node.predicate, node.table)
            result = [r for r in cache[node.table] if pred is None or holds(pred, r)]
        elif node.op in JOIN_OPS:
            (lrows, _), (rrows, _) = kids
            result = []
            for a in lrows:
                for b in rrows:
                    merged = {**a, **b}
                    if node.predicate is None or holds(node.predicate, merged):
                        result.append(merged)
        elif node.op in AGGREGATE_OPS:
            (rows, _), = kids
            if node.op == "HashAggregate" and node.columns:
                seen = {}
                for r in rows:
                    seen.setdefault(tuple(str(r[c]) for c in node.columns), r)
                result = list(seen.values())
            else:
                result = rows[:1]
        else:
            result = kids[0][0]
        card = len(result)
        rows_n = float(db.rows(node.table)) if node.table is not None else 0.0
        own = operator_cost(node, float(max(1, card)), [float(max(1, len(k[0]))) for k in kids], rows_n, costs)
        total = own + sum(k[1] for k in kids)
        total = max(total, 1e-3)
        out[slot] = (card, total)
        return result, total

    run(plan)
    return out
