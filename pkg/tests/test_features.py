import numpy as np
import pytest

from treecost.catalog import CatalogError, SampleStore
from treecost.features import (
    MAX_PREDICATE_CODES,
    CodeLayout,
    FeatureError,
    Featurizer,
    collate,
    deserialize_predicate,
    encode_leaf,
    encode_metadata,
    encode_operation,
    normalize_numeric,
    serialize_predicate,
)
from treecost.plan import OPERATORS, ColumnRef, PlanNode, and_, binarize, binarize_predicate, expr, or_
from treecost.predicates import evaluate
from treecost.strings import HashBitmapEncoder, hash_bitmap


@pytest.fixture
def fz(tiny):
    return Featurizer(tiny.catalog, SampleStore.build(tiny, size=4, seed=0), HashBitmapEncoder(8))


def test_operation_is_one_hot():
    v = encode_operation("HashJoin")
    assert v.sum() == 1 and v[OPERATORS.index("HashJoin")] == 1
    with pytest.raises(FeatureError):
        encode_operation("Teleport")


def test_metadata_marks_table_and_columns(tiny):
    cat = tiny.catalog
    node = PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 2000))
    v = encode_metadata(node, cat)
    nt = len(cat.tables)
    assert v[cat.table_pos["title"]] == 1
    assert v[nt + cat.column_pos["title.production_year"]] == 1
    assert v.sum() == 2


def test_metadata_unknown_column(tiny):
    with pytest.raises(CatalogError):
        encode_metadata(PlanNode("SeqScan", table="title", predicate=expr("budget", ">", 1)), tiny.catalog)


def test_normalize_numeric_clamps():
    assert normalize_numeric(5, 0, 10) == 0.5
    assert normalize_numeric(-1, 0, 10) == 0.0
    assert normalize_numeric(99, 0, 10) == 1.0
    assert normalize_numeric(3, 3, 3) == 0.5


def test_numeric_leaf(tiny):
    enc = HashBitmapEncoder(8)
    cat = tiny.catalog
    v = encode_leaf(expr("title.production_year", ">", 2005), cat, enc)
    c = len(cat.columns)
    assert v[cat.column_pos["title.production_year"]] == 1
    assert v[:c].sum() == 1
    num = c + 7  # after the seven predicate operators
    assert v[num] == pytest.approx((2005 - 1990) / (2015 - 1990))


def test_string_leaf_carries_encoding_and_flag(tiny):
    enc = HashBitmapEncoder(8)
    cat = tiny.catalog
    v = encode_leaf(expr("title.title", "LIKE", "Din%"), cat, enc)
    lay = CodeLayout(len(cat.columns), 8)
    s0 = len(cat.columns) + 8
    assert np.array_equal(v[s0: s0 + 8], enc.encode("Din%"))
    assert v[s0 + 8] == 1
    assert len(v) == lay.leaf_width


def test_join_leaf_marks_operand_column(tiny):
    cat = tiny.catalog
    v = encode_leaf(expr("title.id", "=", ColumnRef("movie_info.movie_id")), cat, HashBitmapEncoder(8))
    c = len(cat.columns)
    tail = v[c + 8 + 8 + 1:]
    assert tail.sum() == 1 and tail[cat.column_pos["movie_info.movie_id"]] == 1


def test_type_mismatch_rejected(tiny):
    with pytest.raises(FeatureError):
        encode_leaf(expr("title.title", "=", 3), tiny.catalog, HashBitmapEncoder(8))
    with pytest.raises(FeatureError):
        encode_leaf(expr("title.kind_id", "=", "x"), tiny.catalog, HashBitmapEncoder(8))


# ---------------------------------------------------------------- predicate codes

LAY = CodeLayout(n_columns=3, string_dim=2)


def _leaf_code(leaf):
    v = np.zeros(LAY.leaf_width, dtype=np.float32)
    v[0] = float(leaf.operand) + 1  # tag rows so they can be told apart
    return v


def test_serialize_small_tree():
    p = and_(expr("a", "=", 1), or_(expr("a", "=", 2), expr("a", "=", 3)))
    codes = serialize_predicate(p, _leaf_code, LAY)
    kinds = []
    for row in codes:
        if row[LAY.flag_and]:
            kinds.append("AND")
        elif row[LAY.flag_or]:
            kinds.append("OR")
        elif row[LAY.flag_empty]:
            kinds.append("E")
        else:
            kinds.append(int(row[0]) - 1)
    assert kinds == ["AND", 1, "E", "OR", 2, "E", 3, "E", "E"]
    assert deserialize_predicate(codes, LAY) == ("and", 1, ("or", 4, 6))


def test_single_leaf_has_no_empty_code():
    codes = serialize_predicate(expr("a", "=", 1), _leaf_code, LAY)
    assert codes.shape == (1, LAY.code_width)


def test_code_cap():
    # n leaves need 4n - 3 codes
    ok = binarize_predicate(and_(*[expr("a", "=", i) for i in range(8)]))
    assert len(serialize_predicate(ok, _leaf_code, LAY)) == 29 <= MAX_PREDICATE_CODES
    p = binarize_predicate(and_(*[expr("a", "=", i) for i in range(9)]))
    with pytest.raises(FeatureError, match="cap"):
        serialize_predicate(p, _leaf_code, LAY)


def test_deserialize_rejects_malformed():
    codes = serialize_predicate(and_(expr("a", "=", 1), expr("a", "=", 2)), _leaf_code, LAY)
    with pytest.raises(FeatureError):
        deserialize_predicate(codes[:-1], LAY)
    with pytest.raises(FeatureError):
        deserialize_predicate(np.concatenate([codes, codes[:1]]), LAY)


# ---------------------------------------------------------------- bitmaps and trees


def test_sample_bitmap_matches_predicate(fz):
    store = fz.store
    node = PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 1999))
    f = fz.node_features(node)
    cols = store.columns["title"]
    expect = evaluate(expr("title.production_year", ">", 1999), cols, store.sample_count("title"))
    assert np.array_equal(f.bitmap[:4].astype(bool), expect)
    assert f.bitmap.shape == (4,)


def test_sample_bitmap_zero_padded(tiny):
    fz = Featurizer(tiny.catalog, SampleStore.build(tiny, size=10, seed=0), HashBitmapEncoder(8))
    f = fz.node_features(PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 0)))
    assert f.bitmap[:6].sum() == 6 and f.bitmap[6:].sum() == 0


def test_join_node_has_no_bitmap(fz):
    j = PlanNode("HashJoin", predicate=expr("title.id", "=", ColumnRef("movie_info.movie_id")),
                 children=(PlanNode("SeqScan", table="title"), PlanNode("SeqScan", table="movie_info")))
    f = fz.node_features(j)
    assert f.bitmap.sum() == 0 and f.predicate is not None


def test_string_operand_uses_encoder(fz):
    f = fz.node_features(PlanNode("SeqScan", table="title", predicate=expr("title", "LIKE", "%Kas")))
    s0 = len(fz.catalog.columns) + 8
    assert np.array_equal(f.predicate[0, s0: s0 + 8], hash_bitmap("Kas", 8))


def _plan():
    scan_t = PlanNode("SeqScan", table="title", predicate=expr("production_year", ">", 1995), true_card=4, true_cost=6)
    scan_i = PlanNode("SeqScan", table="movie_info", true_card=8, true_cost=8)
    join = PlanNode("HashJoin", predicate=expr("title.id", "=", ColumnRef("movie_info.movie_id")),
                    children=(scan_t, scan_i), true_card=5, true_cost=30)
    return binarize(PlanNode("Sort", children=(join,), true_card=5, true_cost=40))


def test_encode_tree_mirrors_plan(fz):
    e = fz.encode_tree(_plan())
    assert e.right is None and e.card == 5 and e.cost == 40
    assert e.left.left.plan.table == "title" and e.left.right.card == 8


def test_collate_levels(fz):
    trees = [fz.encode_tree(_plan()), fz.encode_tree(PlanNode("SeqScan", table="title", true_card=6, true_cost=6))]
    b = collate(trees, fz.layout, fz.widths)
    assert b.depth == 3 and b.n_trees == 2 and b.n_nodes() == 5
    assert [len(lv) for lv in b.levels] == [2, 1, 2]
    assert b.levels[0].left.tolist() == [0, -1] and b.levels[0].right.tolist() == [-1, -1]
    assert b.levels[1].left.tolist() == [0] and b.levels[1].right.tolist() == [1]
    assert b.levels[2].tree.tolist() == [0, 0]
    card, cost = b.root_labels()
    assert card.tolist() == [5, 6] and cost.tolist() == [40, 6]
    # title scan and join carry predicates; the sort and the bare scans do not
    assert (b.levels[0].pred_slot == -1).all()
    assert b.levels[1].pred_slot[0] >= 0 and b.levels[2].pred_slot.tolist()[1] == -1


def test_program_pools_in_height_order(fz):
    p = PlanNode("SeqScan", table="title",
                 predicate=binarize_predicate(and_(expr("production_year", ">", 1995),
                                                   or_(expr("kind_id", "=", 1), expr("kind_id", "=", 2)))))
    b = fz.encode_plan_batch([p])
    prog = b.program
    assert len(prog.leaf_codes) == 3
    assert [len(g[0]) for g in prog.groups] == [1, 1]
    (l1, r1, and1), (l2, r2, and2) = prog.groups
    assert not and1[0] and and2[0]
    assert l2[0] == 0 and r2[0] == 3  # the OR lands in the first derived slot
    assert b.levels[0].pred_slot[0] == 4
