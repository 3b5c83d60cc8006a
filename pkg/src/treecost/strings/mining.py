"""End-to-end mining: workload LIKE operands -> rules -> trained dictionary."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .. import kernels
from .encoders import like_mode
from .patterns import QueryNotFound, Rule, generate_candidate_rules, join_corpus
from .selection import SubstringDictionary, build_dictionary, default_budget, rule_extractions, select_rules

log = logging.getLogger(__name__)

_SEARCH_KIND = {"prefix": "prefix", "suffix": "suffix", "contains": "substring", "exact": "prefix"}


@dataclass
class MiningResult:
    rules: list[Rule]
    dictionary: SubstringDictionary
    workload: set[str]
    candidates: int


def mine_rules(
    operands: Iterable[str],
    values: Sequence[str],
    budget: int | None = None,
    values_per_query: int = 3,
) -> MiningResult:
    """Select rules covering every LIKE/equality literal in ``operands``.

    Candidate rules come from up to ``values_per_query`` matching values per
    literal (sorted order, so the result is deterministic).
    """
    distinct = sorted(set(values))
    corpus = join_corpus(distinct)
    workload: set[str] = set()
    candidates: set[Rule] = set()
    for op in sorted(set(operands)):
        mode, body = like_mode(op)
        if not body:
            continue
        kind = _SEARCH_KIND[mode]
        pattern = {"prefix": f"{body}%", "suffix": f"%{body}", "substring": f"%{body}%"}[kind]
        hits = [v for v, ok in zip(distinct, kernels.like_mask(distinct, pattern)) if ok][:values_per_query]
        if not hits:
            log.warning("literal %r matches no value; skipped", body)
            continue
        workload.add(body)
        for v in hits:
            try:
                candidates |= generate_candidate_rules(body, v, kind)
            except QueryNotFound:
                continue
    budget = default_budget(workload) if budget is None else budget
    cand = sorted(candidates)
    ext = rule_extractions(cand, corpus)
    rules = select_rules(cand, workload, budget=budget, extractions=ext)
    d = build_dictionary(rules, corpus, budget=budget)
    log.info("mined %d rules from %d candidates, %d dictionary entries", len(rules), len(cand), len(d))
    return MiningResult(rules, d, workload, len(cand))
