import threading

import numpy as np
import pytest
from synth import random_plan

from treecost.model import ModelConfig, TargetNormalizer, TreeCostModel
from treecost.plan import PlanNode, binarize, canonical_hash
from treecost.pool import Estimator, MemoryPool, PoolEntry
from treecost.train.loop import predict

SMALL = ModelConfig(hidden=16, emb_op=8, emb_meta=8, emb_bitmap=8, emb_pred=8, head_hidden=8, seed=2)
NORM = TargetNormalizer(0.0, 12.0, 0.0, 9.0)


def entry(x: float) -> PoolEntry:
    return PoolEntry(np.full(2, x), np.full(2, x), x, x)


def test_put_get():
    pool = MemoryPool(4)
    pool.put(b"a", entry(1))
    assert pool.get(b"a").cost == 1
    assert pool.get(b"b") is None
    assert (pool.hits, pool.misses) == (1, 1)


def test_lru_capacity_one():
    pool = MemoryPool(1)
    pool.put(b"a", entry(1))
    pool.put(b"b", entry(2))
    assert pool.get(b"a") is None and pool.get(b"b").cost == 2 and len(pool) == 1


def test_lru_order_follows_reads():
    pool = MemoryPool(2)
    pool.put(b"a", entry(1))
    pool.put(b"b", entry(2))
    pool.get(b"a")
    pool.put(b"c", entry(3))
    assert pool.get(b"b") is None and pool.get(b"a") is not None


def test_zero_capacity_stores_nothing():
    pool = MemoryPool(0)
    pool.put(b"a", entry(1))
    assert len(pool) == 0
    with pytest.raises(ValueError):
        MemoryPool(-1)


def test_bind_to_new_owner_clears():
    pool = MemoryPool(4)
    pool.bind("m1")
    pool.put(b"a", entry(1))
    pool.bind("m1")
    assert len(pool) == 1
    pool.bind("m2")
    assert len(pool) == 0


def test_concurrent_access():
    pool = MemoryPool(64)

    def work(k):
        for i in range(500):
            key = bytes([(k * 7 + i) % 100])
            if pool.get(key) is None:
                pool.put(key, entry(i))

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(pool) <= 64 and pool.hits + pool.misses == 4000


# ---------------------------------------------------------------- estimator


@pytest.fixture(scope="module")
def model(small_featurizer):
    return TreeCostModel(small_featurizer.widths, SMALL)


def test_pool_on_off_agree(model, small_featurizer):
    rng = np.random.default_rng(0)
    plans = [random_plan(rng, int(rng.integers(1, 6))) for _ in range(100)]
    plain = Estimator(model, NORM, small_featurizer)
    pooled = Estimator(model, NORM, small_featurizer, MemoryPool(4096))
    for p in plans:
        a, b = plain.estimate(p), pooled.estimate(p)
        assert a == pytest.approx(b, rel=1e-6)


def test_estimator_matches_batched_predict(model, small_featurizer):
    rng = np.random.default_rng(1)
    plans = [random_plan(rng, 4) for _ in range(10)]
    cost, card = predict(model, NORM, [small_featurizer.encode_tree(p) for p in plans])
    est = Estimator(model, NORM, small_featurizer)
    for i, p in enumerate(plans):
        c, k = est.estimate(p)
        assert c == pytest.approx(cost[i], rel=1e-5) and k == pytest.approx(card[i], rel=1e-5)


def test_shared_subplans_skip_cell_calls(model, small_featurizer):
    rng = np.random.default_rng(2)
    base = random_plan(rng, 4)
    plans = [binarize(PlanNode(op, children=(base,))) for op in ("Sort", "Aggregate", "HashAggregate")]
    pool = MemoryPool(64)
    est = Estimator(model, NORM, small_featurizer, pool)
    model.counters.cell_calls = 0
    for p in plans:
        est.estimate(p)
    assert model.counters.cell_calls == base.size() + 3
    assert pool.hits == 2
    model.counters.cell_calls = 0
    plain = Estimator(model, NORM, small_featurizer)
    for p in plans:
        plain.estimate(p)
    assert model.counters.cell_calls == 3 * (base.size() + 1)


def test_estimate_all_reports_subplans(model, small_featurizer):
    p = random_plan(np.random.default_rng(3), 3)
    out = Estimator(model, NORM, small_featurizer, MemoryPool(16)).estimate_all(p)
    assert len(out) == p.size()
    assert canonical_hash(out[-1][0]) == canonical_hash(binarize(p))
