"""Representation cache keyed by canonical sub-plan digests.

Estimating a plan walks it bottom-up; a sub-plan whose digest is already in
the pool reuses the stored (G, R) state instead of running the cell over the
whole subtree again.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .features import EncodedNode, Featurizer
from .model import TargetNormalizer, TreeCostModel
from .nn import const
from .plan import PlanNode, binarize, canonical_hash


@dataclass(frozen=True)
class PoolEntry:
    g: np.ndarray
    r: np.ndarray
    cost: float
    card: float


class MemoryPool:
    """Bounded LRU map from plan digest to representation state.

    Lookups and inserts take a lock, so one pool can serve several
    estimating threads.
    """

    def __init__(self, capacity: int = 4096):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self._data: OrderedDict[bytes, PoolEntry] = OrderedDict()
        self._lock = threading.RLock()
        self.hits = 0
        self.misses = 0
        self.owner: object = None

    def __len__(self) -> int:
        return len(self._data)

    def get(self, digest: bytes) -> PoolEntry | None:
        with self._lock:
            e = self._data.get(digest)
            if e is None:
                self.misses += 1
                return None
            self._data.move_to_end(digest)
            self.hits += 1
            return e

    def put(self, digest: bytes, entry: PoolEntry) -> None:
        if self.capacity == 0:
            return
        with self._lock:
            self._data[digest] = entry
            self._data.move_to_end(digest)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0

    def bind(self, owner: object) -> None:
        """Drop everything when a different model/dataset starts using the pool."""
        with self._lock:
            if self.owner is not owner:
                self._data.clear()
                self.owner = owner


class Estimator:
    """Per-plan estimation, optionally through a :class:`MemoryPool`."""

    def __init__(self, model: TreeCostModel, normalizer: TargetNormalizer, featurizer: Featurizer,
                 pool: MemoryPool | None = None):
        self.model = model
        self.normalizer = normalizer
        self.featurizer = featurizer
        self.pool = pool
        if pool is not None:
            pool.bind(model)

    def _heads(self, r: np.ndarray) -> tuple[float, float]:
        c, k = self.model.heads(const(r))
        return (float(self.normalizer.denormalize_cost(c.value[0, 0])),
                float(self.normalizer.denormalize_card(k.value[0, 0])))

    def _state(self, plan: PlanNode, enc: EncodedNode, out: list) -> PoolEntry:
        digest = canonical_hash(plan) if self.pool is not None else None
        if digest is not None:
            hit = self.pool.get(digest)
            if hit is not None:
                out.append((plan, hit))
                return hit
        kids = list(plan.children) + [None] * (2 - len(plan.children))
        encs = (enc.left, enc.right)
        child_states = []
        for c, e in zip(kids, encs):
            if c is None:
                child_states.append(None)
            else:
                s = self._state(c, e, out)
                child_states.append((const(s.g), const(s.r)))
        g, r = self.model.node_state(enc, child_states[0], child_states[1])
        cost, card = self._heads(r.value)
        entry = PoolEntry(g.value.copy(), r.value.copy(), cost, card)
        if digest is not None:
            self.pool.put(digest, entry)
        out.append((plan, entry))
        return entry

    def estimate_all(self, plan: PlanNode) -> list[tuple[PlanNode, PoolEntry]]:
        """Entries for the root and every sub-plan that had to be visited."""
        plan = binarize(plan)
        out: list = []
        self._state(plan, self.featurizer.encode_tree(plan), out)
        return out

    def estimate(self, plan: PlanNode) -> tuple[float, float]:
        """(cost, card) of the whole plan in natural units."""
        e = self.estimate_all(plan)[-1][1]
        return e.cost, e.card
