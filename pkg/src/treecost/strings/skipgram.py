"""Skip-gram embeddings for the substring dictionary.

Each tuple becomes one sentence: a token for its primary key plus every
dictionary substring the selected rules extract from its string values.
The context window is the whole sentence.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .. import kernels
from .patterns import Rule, compile_pattern, cut_match, join_corpus
from .selection import SubstringDictionary

NOISE_POWER = 0.75
NOISE_TABLE_SIZE = 100_000


def tuple_sentences(
    keys: Sequence, string_columns: Sequence[Sequence[str]], rules: Iterable[Rule], d: SubstringDictionary
) -> list[list[str]]:
    rules = list(rules)
    words: list[set[str]] = [set() for _ in keys]
    for col in string_columns:
        # one scan per rule over the whole column; match offsets map back to rows
        text = join_corpus(str(v) for v in col)
        starts = np.cumsum([0] + [len(str(v)) + 1 for v in col[:-1]]) if len(col) else np.zeros(0, np.int64)
        for r in rules:
            for m in compile_pattern(r.pattern).finditer(text):
                s = cut_match(r, m.group(1))
                if s is not None and s in d.entries:
                    words[int(np.searchsorted(starts, m.start(), side="right")) - 1].add(s)
    return [[f"#pk:{key}"] + sorted(w) for key, w in zip(keys, words)]


def init_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return ((rng.random((n, dim)) - 0.5) / dim).astype(np.float32)


def noise_table(counts: np.ndarray, size: int = NOISE_TABLE_SIZE) -> np.ndarray:
    p = np.asarray(counts, dtype=np.float64) ** NOISE_POWER
    cdf = np.cumsum(p / p.sum())
    grid = (np.arange(size) + 0.5) / size
    return np.minimum(np.searchsorted(cdf, grid), len(cdf) - 1).astype(np.int32)


def train_skipgram(
    sentences: list[list[str]],
    d: SubstringDictionary,
    dim: int = 64,
    epochs: int = 5,
    seed: int = 0,
    negative: int = 5,
    lr: float = 0.025,
) -> SubstringDictionary:
    """Fill ``d.entries`` with ``dim``-wide vectors; deterministic under ``seed``.

    Dictionary entries that never occur in a sentence keep their seeded
    initial vector.
    """
    vocab = sorted(d.entries)
    index = {w: i for i, w in enumerate(vocab)}
    for sent in sentences:
        for w in sent:
            if w not in index:
                index[w] = len(index)
    counts = np.zeros(len(index), dtype=np.int64)
    flat, offsets = [], [0]
    for sent in sentences:
        for w in sent:
            flat.append(index[w])
            counts[index[w]] += 1
        offsets.append(len(flat))
    w_in = init_vectors(len(index), dim, seed)
    w_out = np.zeros_like(w_in)
    if epochs > 0 and flat:
        table = noise_table(np.maximum(counts, 1))
        kernels.sgns_train(w_in, w_out, flat, offsets, table, negative, lr, lr * 1e-4, epochs, seed + 1)
    if not np.isfinite(w_in).all():
        raise FloatingPointError("skip-gram produced non-finite vectors")
    d.dim = dim
    for w in vocab:
        d.entries[w] = w_in[index[w]].copy()
    return d
