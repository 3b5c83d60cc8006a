"""Extraction rules ``<F, P, L>`` over string values.

A pattern is a sequence of tokens: character classes (``P_C`` = ``[A-Z]+``,
``P_l`` = ``[a-z]+``, ``P_n`` = ``[0-9]+``, ``P_s`` = whitespace+) and exact
literals ``P_t(T)``.  A pattern is tried at every *token start* of a value,
i.e. a position where the character class changes (punctuation characters
each start a token).  Quantifiers are greedy with ordinary backtracking, so
``P_n P_t("6")`` matches ``"06"``.  A ``Prefix`` rule keeps the first ``L``
characters of each match, a ``Suffix`` rule the last ``L``.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass
from typing import Iterable, Iterator

CLASS_KINDS = ("C", "l", "n", "s")
_CLASS_RE = {"C": "[A-Z]+", "l": "[a-z]+", "n": "[0-9]+", "s": r"[^\S\n]+"}
_CLASS_SET = {"C": "A-Z", "l": "a-z", "n": "0-9", "s": r"^\S\n"}

PREFIX = "Prefix"
SUFFIX = "Suffix"


def char_class(ch: str) -> str | None:
    if "A" <= ch <= "Z":
        return "C"
    if "a" <= ch <= "z":
        return "l"
    if "0" <= ch <= "9":
        return "n"
    if ch.isspace() and ch != "\n":
        return "s"
    return None


@dataclass(frozen=True, order=True)
class PatternToken:
    kind: str  # "C" | "l" | "n" | "s" | "t"
    literal: str = ""

    def __post_init__(self):
        if self.kind not in CLASS_KINDS and self.kind != "t":
            raise ValueError(f"unknown token kind {self.kind!r}")
        if self.kind == "t" and not self.literal:
            raise ValueError("P_t needs a nonempty literal")

    def regex(self) -> str:
        return re.escape(self.literal) if self.kind == "t" else _CLASS_RE[self.kind]

    def __str__(self) -> str:
        if self.kind == "t":
            return f"P_t({json.dumps(self.literal, ensure_ascii=False)})"
        return f"P_{self.kind}"


P_C, P_l, P_n, P_s = (PatternToken(k) for k in CLASS_KINDS)


def P_t(text: str) -> PatternToken:
    return PatternToken("t", text)


@dataclass(frozen=True, order=True)
class Rule:
    function: str  # PREFIX | SUFFIX
    pattern: tuple[PatternToken, ...]
    length: int

    def __post_init__(self):
        if self.function not in (PREFIX, SUFFIX):
            raise ValueError(f"unknown string function {self.function!r}")
        if not self.pattern:
            raise ValueError("empty pattern")
        if self.length < 1:
            raise ValueError("extraction length must be >= 1")

    @property
    def pattern_str(self) -> str:
        return " ".join(str(t) for t in self.pattern)

    def __str__(self) -> str:
        return f"{self.function}\t{self.pattern_str}\t{self.length}"


@functools.lru_cache(maxsize=65536)
def compile_pattern(pattern: tuple[PatternToken, ...]) -> re.Pattern:
    """All-start-positions matcher: one lookahead match per token start."""
    first = pattern[0]
    cls = first.kind if first.kind != "t" else char_class(first.literal[0])
    guard = f"(?<![{_CLASS_SET[cls]}])" if cls is not None else ""
    body = "".join(t.regex() for t in pattern)
    return re.compile(f"{guard}(?=({body}))")


def _in_class(ch: str, kind: str) -> bool:
    return char_class(ch) == kind


def _match_at(pattern: tuple[PatternToken, ...], value: str, k: int, pos: int) -> int | None:
    """End of the first (greedy, backtracking) match of ``pattern[k:]`` at ``pos``."""
    if k == len(pattern):
        return pos
    tok = pattern[k]
    if tok.kind == "t":
        if value.startswith(tok.literal, pos):
            return _match_at(pattern, value, k + 1, pos + len(tok.literal))
        return None
    end = pos
    while end < len(value) and _in_class(value[end], tok.kind):
        end += 1
    for stop in range(end, pos, -1):
        r = _match_at(pattern, value, k + 1, stop)
        if r is not None:
            return r
    return None


def match_all(pattern: tuple[PatternToken, ...], value: str) -> list[str]:
    """Same matches as ``compile_pattern(pattern).finditer``, without building a regex.

    Cheaper for checking one short value against many one-off patterns.
    """
    first = pattern[0]
    cls = first.kind if first.kind != "t" else char_class(first.literal[0])
    out = []
    for i in range(len(value)):
        if cls is not None and i > 0 and _in_class(value[i - 1], cls):
            continue
        end = _match_at(pattern, value, 0, i)
        if end is not None:
            out.append(value[i:end])
    return out


def cut_match(rule: Rule, m: str) -> str | None:
    if len(m) < rule.length:
        return None
    return m[: rule.length] if rule.function == PREFIX else m[-rule.length:]


def pattern_matches(pattern: tuple[PatternToken, ...], value: str) -> set[str]:
    """Distinct full matches of ``pattern`` starting at token starts of ``value``."""
    return {m.group(1) for m in compile_pattern(pattern).finditer(value)}


def apply_rule(rule: Rule, value: str) -> set[str]:
    rx = compile_pattern(rule.pattern)
    out = set()
    for m in rx.finditer(value):
        s = cut_match(rule, m.group(1))
        if s is not None:
            out.add(s)
    return out


def extract_corpus(rule: Rule, corpus_text: str) -> set[str]:
    """``apply_rule`` over every line of a newline-joined corpus at once."""
    return apply_rule(rule, corpus_text)


def join_corpus(values: Iterable[str]) -> str:
    return "\n".join(v.replace("\n", " ") for v in values)


# ------------------------------------------------------------ candidates


class QueryNotFound(ValueError):
    pass


def _runs(value: str) -> list[tuple[int, int, str | None]]:
    runs: list[tuple[int, int, str | None]] = []
    i = 0
    while i < len(value):
        cls = char_class(value[i])
        j = i + 1
        if cls is not None:
            while j < len(value) and char_class(value[j]) == cls:
                j += 1
        runs.append((i, j, cls))
        i = j
    return runs


def _words(value: str) -> list[tuple[int, int]]:
    return [m.span() for m in re.finditer(r"\S+", value)]


def _word_index(words: list[tuple[int, int]], pos: int) -> int:
    for k, (s, e) in enumerate(words):
        if s <= pos < e:
            return k
    for k, (s, _) in enumerate(words):  # pos in whitespace: next word
        if s > pos:
            return k
    return len(words) - 1


def _piece_options(piece: tuple[int, int, str | None], a: int, b: int, value: str):
    p0, p1, cls = piece
    text = value[p0:p1]
    if cls is None:
        return [[("t", text)]]
    if p1 <= a or p0 >= b:
        # context outside the query is always generalised
        return [[(cls, text)]]
    opts: list[list[tuple[str, str]]] = [[("t", text)], [(cls, text)]]
    # mixed class/literal splits only where a query edge falls inside the run
    straddles = p0 < a < p1 or p0 < b < p1
    if straddles and p1 - p0 >= 2:
        for k in range(max(p0 + 1, a), min(p1 - 1, b) + 1):
            opts.append([(cls, value[p0:k]), ("t", value[k:p1])])
            opts.append([("t", value[p0:k]), (cls, value[k:p1])])
    return opts


def _region_patterns(value: str, s: int, e: int, a: int, b: int, max_tokens: int) -> Iterator[tuple[PatternToken, ...]]:
    pieces = []
    for r0, r1, cls in _runs(value):
        lo, hi = max(r0, s), min(r1, e)
        if lo < hi:
            pieces.append((lo, hi, cls))
    options = [_piece_options(p, a, b, value) for p in pieces]

    def rec(k: int, acc: list[tuple[str, str]]):
        if len(acc) > max_tokens:
            return
        if k == len(options):
            yield tuple(PatternToken(kind, lit if kind == "t" else "") for kind, lit in acc)
            return
        for opt in options[k]:
            nxt = list(acc)
            for kind, lit in opt:
                if kind == "t" and nxt and nxt[-1][0] == "t":
                    nxt[-1] = ("t", nxt[-1][1] + lit)
                else:
                    nxt.append((kind, lit))
            yield from rec(k + 1, nxt)

    yield from rec(0, [])


def generate_candidate_rules(
    query: str,
    value: str,
    search_kind: str,
    max_context_words: int = 2,
    max_tokens: int = 8,
) -> set[Rule]:
    """Every rule that extracts ``query`` from ``value``.

    ``search_kind`` is ``prefix`` (``LIKE 'q%'``), ``suffix`` (``LIKE '%q'``)
    or ``substring`` (``LIKE '%q%'``).  Match regions extend the query by at
    most ``max_context_words`` whitespace-delimited words on the open side.
    """
    if not query:
        raise QueryNotFound("empty query string")
    n, q = len(value), len(query)
    if search_kind == "prefix":
        starts = [0] if value.startswith(query) else []
        functions = (PREFIX,)
    elif search_kind == "suffix":
        starts = [n - q] if n >= q and value.endswith(query) else []
        functions = (SUFFIX,)
    elif search_kind == "substring":
        starts = [i for i in range(n - q + 1) if value.startswith(query, i)]
        functions = (PREFIX, SUFFIX)
    else:
        raise ValueError(f"unknown search kind {search_kind!r}")
    if not starts:
        raise QueryNotFound(f"{query!r} does not occur in {value!r} as {search_kind}")

    runs = _runs(value)
    bounds = sorted({r[0] for r in runs} | {r[1] for r in runs})
    words = _words(value)
    out: set[Rule] = set()
    for a in starts:
        b = a + q
        for fn in functions:
            if fn == PREFIX:
                wi = _word_index(words, b - 1)
                limit = words[min(wi + max_context_words, len(words) - 1)][1]
                regions = [(a, e) for e in sorted({b} | {x for x in bounds if b < x <= limit})]
            else:
                wi = _word_index(words, a)
                limit = words[max(wi - max_context_words, 0)][0]
                regions = [(st, b) for st in sorted({a} | {x for x in bounds if limit <= x < a})]
            for s, e in regions:
                for pat in _region_patterns(value, s, e, a, b, max_tokens):
                    rule = Rule(fn, pat, q)
                    if any(cut_match(rule, m) == query for m in match_all(pat, value)):
                        out.add(rule)
    return out


# ------------------------------------------------------------ text format

_TOKEN_RE = re.compile(r'P_([Clns])\b|P_t\(("(?:[^"\\]|\\.)*")\)|P_t\(([^)]*)\)')


def parse_pattern(text: str) -> tuple[PatternToken, ...]:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ValueError(f"bad pattern token at {text[pos:]!r}")
        if m.group(1):
            tokens.append(PatternToken(m.group(1)))
        elif m.group(2):
            tokens.append(P_t(json.loads(m.group(2))))
        else:
            tokens.append(P_t(m.group(3)))
        pos = m.end()
    return tuple(tokens)


def parse_rule(line: str) -> Rule:
    line = line.strip()
    sep = "\t" if "\t" in line else r"\s{2,}"
    parts = [p for p in re.split(sep, line) if p]
    if len(parts) != 3:
        raise ValueError(f"expected '<function> <pattern> <length>', got {line!r}")
    return Rule(parts[0], parse_pattern(parts[1]), int(parts[2]))


def dumps_rules(rules: Iterable[Rule]) -> str:
    return "".join(f"{r}\n" for r in rules)


def loads_rules(text: str) -> list[Rule]:
    return [parse_rule(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]
