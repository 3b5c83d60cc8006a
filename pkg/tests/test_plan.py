import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treecost.plan import (
    ColumnRef,
    PlanError,
    PlanNode,
    PlanSyntaxError,
    and_,
    binarize,
    binarize_predicate,
    canonical_hash,
    expr,
    is_binary,
    or_,
    parse_plan,
    serialize_plan,
)
from treecost.predicates import evaluate

FIXTURE = Path(__file__).parent / "data" / "fixture_plan.json"
FIXTURE_DIGEST = "9be257e610822ab8b147c80d3144dd5bd2421723acf0453e02035d0e0a3cf132"


def scan(pred: dict | None = None, table="title") -> dict:
    node = {"op": "SeqScan", "table": table}
    if pred is not None:
        node["predicate"] = pred
    return node


def leaf(column, op, operand):
    return {"kind": "expr", "column": column, "operator": op, "operand": operand}


# ---------------------------------------------------------------- parsing


def test_single_scan_with_numeric_predicate():
    p = parse_plan(json.dumps(scan(leaf("production_year", ">", 1988))))
    assert p.size() == 1
    assert p.predicate == expr("production_year", ">", 1988)


def test_join_without_children_is_rejected():
    with pytest.raises(PlanError, match="join requires two inputs"):
        parse_plan(json.dumps({"op": "HashJoin", "children": []}))


def test_not_over_or_uses_de_morgan():
    pred = {"kind": "not", "children": [{"kind": "or", "children": [leaf("a", "=", 5), leaf("b", "=", 6)]}]}
    p = parse_plan(json.dumps(scan(pred)))
    assert p.predicate == and_(expr("a", "!=", 5), expr("b", "!=", 6))


def test_not_like_stays_a_leaf_operator():
    pred = {"kind": "not", "children": [leaf("t", "LIKE", "Din%")]}
    assert parse_plan(json.dumps(scan(pred))).predicate == expr("t", "NOT LIKE", "Din%")


def test_not_of_range_becomes_disjunction():
    pred = {"kind": "not", "children": [leaf("y", ">", 3)]}
    assert parse_plan(json.dumps(scan(pred))).predicate == or_(expr("y", "<", 3), expr("y", "=", 3))


def test_in_list_becomes_balanced_or_of_equalities():
    p = parse_plan(json.dumps(scan(leaf("k", "IN", [1, 2, 3, 4]))))
    assert p.predicate == or_(or_(expr("k", "=", 1), expr("k", "=", 2)), or_(expr("k", "=", 3), expr("k", "=", 4)))


def test_syntax_error_reports_position():
    with pytest.raises(PlanSyntaxError) as e:
        parse_plan('{"op": "SeqScan",\n  "table": }')
    assert e.value.line == 2


@pytest.mark.parametrize("doc, msg", [
    ({"op": "Teleport"}, "unknown operator kind"),
    (scan({"kind": "expr", "operator": "=", "operand": 1}), "referencing no column"),
    (scan(leaf("a", "~", 1)), "unknown predicate operator"),
    (scan(leaf("a", "LIKE", 3)), "string operand"),
    ({"op": "Sort", "children": []}, "exactly one input"),
    ({"op": "SeqScan"}, "requires a table"),
])
def test_invalid_documents(doc, msg):
    with pytest.raises(PlanError, match=msg):
        parse_plan(json.dumps(doc))


def test_operator_aliases():
    p = parse_plan(json.dumps(scan(leaf("a", "<>", 1))))
    assert p.predicate.operator == "!="


# ---------------------------------------------------------------- binarize


def test_kary_and_nests_left_deep():
    p1, p2, p3 = expr("a", "=", 1), expr("b", "=", 2), expr("c", "=", 3)
    assert binarize_predicate(and_(p1, p2, p3)) == and_(and_(p1, p2), p3)


def test_binary_tree_is_unchanged():
    t = binarize(parse_plan(FIXTURE.read_text()))
    assert binarize(t) == t


def test_unary_gets_explicit_empty_right_child():
    t = binarize(PlanNode("Sort", children=(PlanNode("SeqScan", table="title"),)))
    assert t.children[1] is None and t.children[0].op == "SeqScan"
    assert is_binary(t)


def test_three_way_join_nests():
    scans = tuple(PlanNode("SeqScan", table=f"t{i}") for i in range(3))
    t = binarize(PlanNode("HashJoin", children=scans))
    assert [c.op for c in t.children] == ["HashJoin", "SeqScan"]
    assert [n.table for n in t.walk() if n.is_scan] == ["t0", "t1", "t2"]


# ---------------------------------------------------------------- hashing


def test_fixture_digest_is_stable():
    t = binarize(parse_plan(FIXTURE.read_text()))
    assert canonical_hash(t).hex() == FIXTURE_DIGEST


def test_hash_survives_round_trip():
    t = binarize(parse_plan(FIXTURE.read_text()))
    assert canonical_hash(parse_plan(serialize_plan(t))) == canonical_hash(t)


def test_operand_change_changes_digest():
    a = PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 1988))
    b = PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 1993))
    assert canonical_hash(a) != canonical_hash(b)


def test_labels_do_not_affect_digest():
    a = PlanNode("SeqScan", table="title")
    assert canonical_hash(a) == canonical_hash(a.with_labels(10, 5.0))


def test_no_collisions_over_many_distinct_plans():
    rng = np.random.default_rng(0)
    seen = {}
    ops = [">", "<", "=", "!="]
    for i in range(100_000):
        pred = expr(f"c{i % 7}", ops[i % 4], int(rng.integers(1 << 40)))
        node = PlanNode("SeqScan", table=f"t{i % 3}", predicate=pred)
        seen[canonical_hash(node)] = node
    distinct = {(n.table, n.predicate) for n in seen.values()}
    assert len(seen) == len(distinct)


def test_labels_are_clamped():
    p = parse_plan(json.dumps({**scan(), "true_card": 0, "true_cost": 0}))
    assert p.true_card == 1.0 and p.true_cost > 0


# ---------------------------------------------------------------- properties

COLUMNS = ["a", "b", "c"]
leaves = st.builds(
    lambda c, op, v: expr(c, op, v),
    st.sampled_from(COLUMNS),
    st.sampled_from(["=", "!=", ">", "<"]),
    st.integers(-3, 3),
)
predicates = st.recursive(
    leaves,
    lambda kids: st.builds(lambda k, xs: (and_ if k else or_)(*xs), st.booleans(), st.lists(kids, min_size=2, max_size=3)),
    max_leaves=8,
)


def _plans(depth: int):
    scans = st.builds(
        lambda t, p: PlanNode("SeqScan", table=t, predicate=p),
        st.sampled_from(["t1", "t2"]),
        st.none() | predicates,
    )
    if depth == 0:
        return scans
    sub = _plans(depth - 1)
    joins = st.builds(
        lambda l, r: PlanNode("HashJoin", predicate=expr("t1.id", "=", ColumnRef("t2.id")), children=(l, r)),
        sub, sub,
    )
    unary = st.builds(lambda c: PlanNode("Aggregate", children=(c,)), sub)
    return scans | joins | unary


plans = _plans(3)


@settings(max_examples=200, deadline=None)
@given(plans)
def test_serialize_parse_round_trip(tree):
    again = parse_plan(serialize_plan(tree))
    assert again == tree
    assert serialize_plan(again) == serialize_plan(tree)


@settings(max_examples=200, deadline=None)
@given(predicates, st.integers(0, 2**31 - 1))
def test_binarize_preserves_leaves_and_semantics(p, seed):
    b = binarize_predicate(p)
    assert list(b.leaves()) == list(p.leaves())
    rng = np.random.default_rng(seed)
    cols = {c: rng.integers(-3, 4, size=64) for c in COLUMNS}
    assert np.array_equal(evaluate(p, cols, 64), evaluate(b, cols, 64))
