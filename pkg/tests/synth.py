"""Random plan trees over the generated schema, for model-level tests."""

import numpy as np

from treecost.plan import ColumnRef, PlanNode, and_, binarize, expr, or_

NUMERIC = {
    "title": [("production_year", 1900, 2019), ("season_nr", 0, 23), ("kind_id", 1, 7)],
    "movie_info": [("info_type_id", 1, 20), ("movie_id", 1, 399)],
}
STRINGS = {"title": ("title", ["Din%", "%Kas%", "%a", "The Red"]), "movie_info": ("info", ["(20%", "%06%", "Drama"])}
UNARY = ("Sort", "Aggregate", "HashAggregate", "MergeSort")
JOINS = ("HashJoin", "MergeJoin", "NestedLoopJoin")


def random_predicate(rng: np.random.Generator, table: str, max_leaves: int = 3):
    leaves = []
    for _ in range(int(rng.integers(1, max_leaves + 1))):
        if rng.random() < 0.3:
            col, ops = STRINGS[table]
            leaves.append(expr(col, ["LIKE", "NOT LIKE", "="][int(rng.integers(3))], ops[int(rng.integers(len(ops)))]))
        else:
            col, lo, hi = NUMERIC[table][int(rng.integers(len(NUMERIC[table])))]
            leaves.append(expr(col, ["=", "!=", ">", "<"][int(rng.integers(4))], int(rng.integers(lo, hi + 1))))
    if len(leaves) == 1:
        return leaves[0]
    return (and_ if rng.random() < 0.6 else or_)(*leaves)


def _scan(rng):
    table = "title" if rng.random() < 0.5 else "movie_info"
    pred = random_predicate(rng, table) if rng.random() < 0.8 else None
    return PlanNode("SeqScan", table=table, predicate=pred)


def random_plan(rng: np.random.Generator, depth: int) -> PlanNode:
    """A labelled binary plan whose longest root-to-leaf path has ``depth`` nodes."""

    def rec(d):
        if d == 1:
            node = _scan(rng)
        elif rng.random() < 0.35:
            node = PlanNode(UNARY[int(rng.integers(len(UNARY)))], children=(rec(d - 1),))
        else:
            kids = [rec(d - 1), rec(int(rng.integers(1, d)))]
            if rng.random() < 0.5:
                kids.reverse()
            join = expr("title.id", "=", ColumnRef("movie_info.movie_id"))
            node = PlanNode(JOINS[int(rng.integers(len(JOINS)))], predicate=join, children=tuple(kids))
        return node.with_labels(float(rng.integers(1, 10_000)), float(rng.uniform(1, 1e5)))

    return binarize(rec(depth))


def plan_with_nodes(rng: np.random.Generator, lo: int, hi: int) -> PlanNode:
    while True:
        p = random_plan(rng, int(rng.integers(2, 5)))
        if lo <= p.size() <= hi:
            return p


def batched_recursive_gap(model, featurizer, plans) -> float:
    """Largest |batched - recursive| over every node state of ``plans``."""
    from treecost.features import collate

    trees = [featurizer.encode_tree(p) for p in plans]
    batch = collate(trees, featurizer.layout, featurizer.widths)
    states = model.forward_batch(batch)
    gap = 0.0
    for t in trees:
        rec = model.forward_recursive(t)
        for d, nodes in enumerate(_levels(t)):
            for n in nodes:
                row = _row_of(batch, d, n)
                g, r = rec[id(n)]
                gap = max(gap, float(np.abs(states[d][0].value[row] - g.value[0]).max()),
                          float(np.abs(states[d][1].value[row] - r.value[0]).max()))
    return gap


def _levels(t):
    out, frontier = [], [t]
    while frontier:
        out.append(frontier)
        frontier = [c for n in frontier for c in (n.left, n.right) if c is not None]
    return out


def _row_of(batch, depth, node):
    for i, n in enumerate(batch.nodes[depth]):
        if n is node:
            return i
    raise KeyError("node not in batch")


def full_model_gradient_error(model, featurizer, plan, max_coords: int = 8, seed: int = 0) -> float:
    """Backprop vs central differences through embedding, cell and both heads (float64)."""
    from treecost.nn import grad_check
    from treecost.train.loop import batch_loss, fit_normalizer

    m64 = model.astype(np.float64)
    # zero-initialised biases put ReLUs fed by all-zero inputs exactly on the kink
    jitter = np.random.default_rng(seed)
    for k, p in m64.params().items():
        if k.endswith(".b"):
            p.value = p.value + jitter.normal(0, 0.1, size=p.shape)
    tree = featurizer.encode_tree(plan)
    norm = fit_normalizer([tree])
    # float64 round-off in the loss dominates below h ~ 1e-5; the second step sidesteps kinks
    return grad_check(lambda: batch_loss(m64, [tree], norm, 0.7), m64.params(), h=(1e-4, 2e-5), max_coords=max_coords, seed=seed)


def oracle_mismatches(db, plans, rel: float = 1e-9) -> list[str]:
    """Nodes where the vectorised executor and the row-at-a-time oracle disagree."""
    from treecost.train.executor import execute_reference
    from treecost.train.oracle import brute_force

    bad = []
    for i, p in enumerate(plans):
        p = binarize(p)
        got = [(n.true_card, n.true_cost) for n in execute_reference(p, db).walk()]
        want = brute_force(p, db)
        if len(got) != len(want):
            bad.append(f"plan {i}: node count {len(got)} != {len(want)}")
            continue
        for k, ((gc, gt), (wc, wt)) in enumerate(zip(got, want)):
            if gc != max(1, wc) or abs(gt - wt) > rel * max(1.0, abs(wt)):
                bad.append(f"plan {i} node {k}: executor ({gc}, {gt}) oracle ({wc}, {wt})")
    return bad
