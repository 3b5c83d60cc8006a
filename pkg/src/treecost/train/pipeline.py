"""Glue for the end-to-end flow: label, mine strings, encode, train, evaluate."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..catalog import Database, SampleStore
from ..features import Featurizer, ZeroStringEncoder
from ..plan import PlanNode, binarize
from ..strings import DictionaryEncoder, HashBitmapEncoder, build_tries, train_skipgram
from ..strings.mining import MiningResult, mine_rules
from ..strings.skipgram import tuple_sentences
from .executor import Executor, ResourceLimitExceeded

log = logging.getLogger(__name__)


def label_workload(db: Database, plans: Sequence[PlanNode], row_limit: int = 5_000_000) -> list[PlanNode]:
    """Binarize and label every plan; plans over the row limit are dropped."""
    ex = Executor(db, row_limit=row_limit)
    out = []
    for p in plans:
        try:
            out.append(ex.run(binarize(p))[1])
        except ResourceLimitExceeded as e:
            log.warning("dropping plan: %s", e)
    return out


def string_operands(db: Database, plans: Sequence[PlanNode]) -> dict[str, list[str]]:
    """String literals per column used by the plans' predicates."""
    out: dict[str, list[str]] = {}
    for plan in plans:
        for node in plan.walk():
            if node.predicate is None:
                continue
            for leaf in node.predicate.leaves():
                if isinstance(leaf.operand, str):
                    out.setdefault(leaf.column, []).append(leaf.operand)
    return out


@dataclass
class StringModel:
    encoder: object
    mining: dict[str, MiningResult]
    dictionary: object = None


def build_string_encoder(kind: str, db: Database, plans: Sequence[PlanNode], dim: int = 64, seed: int = 0,
                         budget: int | None = None, epochs: int = 5) -> StringModel:
    """``kind`` is ``hash``, ``embed`` (rules + skip-gram + tries) or ``none``."""
    if kind == "none":
        return StringModel(ZeroStringEncoder(dim), {})
    if kind == "hash":
        return StringModel(HashBitmapEncoder(dim), {})
    if kind != "embed":
        raise ValueError(f"unknown string encoder {kind!r}")
    from ..strings.selection import SubstringDictionary

    merged = SubstringDictionary(dim=dim)
    mined: dict[str, MiningResult] = {}
    operands = string_operands(db, plans)
    for col in sorted(operands):
        values = [str(v) for v in db.column(col)]
        res = mine_rules(operands[col], values, budget=budget)
        mined[col] = res
        for k in res.dictionary.keys():
            merged.entries[k] = None
            merged.provenance.setdefault(k, set()).update(res.dictionary.provenance[k])
        merged.rules.extend(res.rules)
    sentences: list[list[str]] = []
    for t in db.catalog.tables:
        scols = [c.name for c in db.catalog.columns_of(t.name) if c.kind == "string" and c.name in mined]
        if not scols:
            continue
        keys = db.column(t.primary_key) if t.primary_key else np.arange(db.rows(t.name))
        rules = [r for c in scols for r in mined[c].rules]
        sentences += tuple_sentences([f"{t.name}:{k}" for k in keys], [db.column(c) for c in scols], rules, merged)
    train_skipgram(sentences, merged, dim=dim, epochs=epochs, seed=seed)
    return StringModel(DictionaryEncoder(build_tries(merged)), mined, merged)


def make_featurizer(db: Database, sample_size: int, seed: int, encoder) -> Featurizer:
    return Featurizer(db.catalog, SampleStore.build(db, size=sample_size, seed=seed), encoder)
