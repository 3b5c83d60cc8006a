"""Greedy rule selection under a substring budget, and the substring dictionary."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .patterns import PREFIX, Rule, cut_match, apply_rule, join_corpus, pattern_matches


class InfeasibleBudget(ValueError):
    """The workload strings cannot be covered within the substring budget."""

    def __init__(self, uncovered: set[str], budget: int):
        self.uncovered = set(uncovered)
        self.budget = budget
        shown = ", ".join(sorted(map(repr, self.uncovered))[:10])
        super().__init__(f"{len(self.uncovered)} workload strings uncovered under budget {budget}: {shown}")


class _LineIndex:
    """Which lines of a newline-joined corpus contain a literal."""

    def __init__(self, text: str):
        self.text = text
        self.lines = text.split("\n")
        self.starts = np.cumsum([0] + [len(x) + 1 for x in self.lines[:-1]])
        self._cache: dict[str, str] = {}

    def subset(self, literal: str) -> str:
        hit = self._cache.get(literal)
        if hit is None:
            ids, pos = [], self.text.find(literal)
            while pos >= 0:
                i = int(np.searchsorted(self.starts, pos, side="right")) - 1
                ids.append(i)
                pos = self.text.find(literal, int(self.starts[i]) + len(self.lines[i]) + 1)
            hit = self.text if 2 * len(ids) > len(self.lines) else "\n".join(self.lines[i] for i in ids)
            self._cache[literal] = hit
        return hit


def rule_extractions(rules: Iterable[Rule], corpus: Iterable[str] | str) -> dict[Rule, frozenset[str]]:
    text = corpus if isinstance(corpus, str) else join_corpus(corpus)
    index = _LineIndex(text)
    by_pattern: dict[tuple, list[Rule]] = {}
    for r in rules:
        by_pattern.setdefault(r.pattern, []).append(r)
    out = {}
    for pattern, group in by_pattern.items():
        # matches never cross a newline, so only lines holding the longest literal can match
        lits = [t.literal for t in pattern if t.kind == "t" and "\n" not in t.literal]
        scope = index.subset(max(lits, key=len)) if lits else text
        matches = pattern_matches(pattern, scope)
        for r in group:
            out[r] = frozenset(c for c in (cut_match(r, m) for m in matches) if c is not None)
    return out


def default_budget(workload: set[str]) -> int:
    return 10 * len(workload)


def select_rules(
    candidates: Iterable[Rule],
    workload: Iterable[str],
    corpus: Iterable[str] | str | None = None,
    budget: int | None = None,
    extractions: Mapping[Rule, frozenset[str]] | None = None,
    exact_fallback: bool = True,
) -> list[Rule]:
    """Pick rules whose extractions cover every workload string.

    Candidates are ordered by how many non-workload strings they extract
    (descending) and popped from the back, so the cleanest rules are tried
    first.  Whenever the extracted set reaches ``budget`` the rule with the
    lowest share of workload strings is dropped.  After each addition,
    rules whose workload strings are all covered by the others are pruned.

    If the greedy pass ends without a cover, an exact search over the
    candidates is tried (``exact_fallback``) before giving up.

    Raises :class:`InfeasibleBudget` when coverage fails.
    """
    s_w = set(workload)
    budget = default_budget(s_w) if budget is None else budget
    if extractions is None:
        if corpus is None:
            raise ValueError("need a corpus or precomputed extractions")
        extractions = rule_extractions(candidates, corpus)
    s_r_of = {r: frozenset(extractions[r]) for r in candidates}

    reachable = set().union(*s_r_of.values()) if s_r_of else set()
    if not s_w <= reachable:
        raise InfeasibleBudget(s_w - reachable, budget)

    # rules are handled by position from here on; hashing Rule objects is slow
    rules = list(s_r_of)
    ext = [s_r_of[r] for r in rules]
    wk = [e & s_w for e in ext]
    # descending by garbage; ties: smaller |S_r| first, then pattern text
    queue = sorted(
        range(len(rules)),
        key=lambda j: (-len(ext[j] - s_w), len(ext[j]), rules[j].function, rules[j].pattern_str, rules[j].length),
    )

    def density(i: int) -> tuple:
        e = ext[chosen[i]]
        return (len(wk[chosen[i]]) / max(1, len(e)), -len(e), i)

    count: Counter[str] = Counter()  # how many chosen rules extract each string
    uncovered = len(s_w)

    def add(j: int) -> None:
        nonlocal uncovered
        chosen.append(j)
        count.update(ext[j])
        uncovered -= sum(1 for w in wk[j] if count[w] == 1)

    def drop(i: int) -> None:
        nonlocal uncovered
        for k in ext[chosen.pop(i)]:
            count[k] -= 1
            if count[k] == 0:
                del count[k]
                uncovered += k in s_w

    chosen: list[int] = []
    while uncovered and queue:
        j = queue.pop()
        add(j)
        # drop rules whose workload strings the others now cover; only the
        # new rule and rules sharing strings with it can have become redundant
        maybe = {x for x in chosen if x == j or wk[x] & wk[j]}
        while True:
            redundant = [i for i, x in enumerate(chosen) if x in maybe and all(count[w] >= 2 for w in wk[x])]
            if not redundant:
                break
            drop(min(redundant, key=density))
        while len(count) >= budget and chosen:
            drop(min(range(len(chosen)), key=density))
    s_r = set(count)
    if s_w <= s_r and len(s_r) < budget:
        return [rules[j] for j in chosen]
    if exact_fallback:
        found = exact_cover(s_r_of, s_w, budget)
        if found is not None:
            return found
    raise InfeasibleBudget(s_w - s_r, budget)


def exact_cover(
    s_r_of: Mapping[Rule, frozenset[str]],
    s_w: set[str],
    budget: int,
    node_limit: int = 200_000,
) -> list[Rule] | None:
    """Branch and bound for a rule set covering ``s_w`` with fewer than
    ``budget`` extracted strings.  Returns None when none exists (or the
    search gives up after ``node_limit`` nodes)."""
    useful = sorted(
        (r for r in s_r_of if s_r_of[r] & s_w and len(s_r_of[r]) < budget),
        key=lambda r: (len(s_r_of[r]), r.function, r.pattern_str, r.length),
    )
    covering = {w: [r for r in useful if w in s_r_of[r]] for w in s_w}
    best: list = [None, budget]
    nodes = 0

    def dfs(chosen: list[Rule], ext: frozenset[str]):
        nonlocal nodes
        nodes += 1
        if nodes > node_limit or len(ext) >= best[1]:
            return
        left = s_w - ext
        if not left:
            best[0], best[1] = list(chosen), len(ext)
            return
        w = min(left, key=lambda x: (len(covering[x]), x))
        for r in covering[w]:
            chosen.append(r)
            dfs(chosen, ext | s_r_of[r])
            chosen.pop()

    dfs([], frozenset())
    return best[0]


@dataclass
class SubstringDictionary:
    """Mined substrings, their provenance and (once trained) vectors."""

    entries: dict[str, np.ndarray | None] = field(default_factory=dict)
    provenance: dict[str, set[str]] = field(default_factory=dict)  # "prefix" / "suffix"
    rules: list[Rule] = field(default_factory=list)
    dim: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def keys(self) -> list[str]:
        return sorted(self.entries)

    def vector(self, key: str) -> np.ndarray:
        v = self.entries[key]
        if v is None:
            raise ValueError("dictionary vectors have not been trained")
        return v

    @property
    def trained(self) -> bool:
        return bool(self.entries) and all(v is not None for v in self.entries.values())


def build_dictionary(rules: Iterable[Rule], corpus: Iterable[str] | str, budget: int | None = None) -> SubstringDictionary:
    text = corpus if isinstance(corpus, str) else join_corpus(corpus)
    d = SubstringDictionary(rules=list(rules))
    for r in d.rules:
        tag = "prefix" if r.function == PREFIX else "suffix"
        for s in apply_rule(r, text):
            d.entries[s] = None
            d.provenance.setdefault(s, set()).add(tag)
    if budget is not None and len(d.entries) >= budget:
        raise InfeasibleBudget(set(), budget)
    return d
