"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation (same RNG stream, same
update order) and are used whenever the compiled module is unavailable.
"""

from __future__ import annotations

import math
import re

import numpy as np

_MASK64 = (1 << 64) - 1
_LCG_MUL = 25214903917
_LCG_ADD = 11


def like_to_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.DOTALL)


def like_mask(values, pattern: str) -> np.ndarray:
    """SQL ``LIKE`` over a sequence of strings (``%`` and ``_`` wildcards, no escapes)."""
    n = len(values)
    if "_" not in pattern:
        body = pattern.strip("%")
        if "%" not in body:
            lead = pattern.startswith("%")
            trail = pattern.endswith("%") and len(pattern) > 0
            if not lead and not trail:
                return np.fromiter((v == pattern for v in values), dtype=bool, count=n)
            if lead and trail:
                return np.fromiter((body in v for v in values), dtype=bool, count=n)
            if trail:
                return np.fromiter((v.startswith(body) for v in values), dtype=bool, count=n)
            return np.fromiter((v.endswith(body) for v in values), dtype=bool, count=n)
    rx = like_to_regex(pattern)
    return np.fromiter((rx.fullmatch(v) is not None for v in values), dtype=bool, count=n)


def sgns_train(
    w_in: np.ndarray,
    w_out: np.ndarray,
    tokens: np.ndarray,
    offsets: np.ndarray,
    noise_table: np.ndarray,
    negative: int,
    lr_start: float,
    lr_end: float,
    epochs: int,
    seed: int,
) -> int:
    """Skip-gram with negative sampling, whole sentence as the window.

    Updates ``w_in`` / ``w_out`` in place and returns the final RNG state.
    """
    rng = seed & _MASK64
    n_sent = len(offsets) - 1
    total = max(1, int(offsets[-1]) * epochs)
    table_size = len(noise_table)
    processed = 0
    dim = w_in.shape[1]
    neu1e = np.zeros(dim, dtype=np.float32)
    for _ in range(epochs):
        for s in range(n_sent):
            lo, hi = int(offsets[s]), int(offsets[s + 1])
            lr = lr_start - (lr_start - lr_end) * (processed / total)
            for i in range(lo, hi):
                word = int(tokens[i])
                for j in range(lo, hi):
                    if j == i:
                        continue
                    ctx = int(tokens[j])
                    l1 = w_in[ctx]
                    neu1e[:] = 0.0
                    for d in range(negative + 1):
                        if d == 0:
                            target = word
                            label = 1.0
                        else:
                            rng = (rng * _LCG_MUL + _LCG_ADD) & _MASK64
                            target = int(noise_table[(rng >> 16) % table_size])
                            if target == word:
                                continue
                            label = 0.0
                        row = w_out[target]
                        f = float(np.dot(l1.astype(np.float64), row.astype(np.float64)))
                        # C's exp overflows to inf here, giving a sigmoid of exactly 0
                        sig = 0.0 if f < -700.0 else 1.0 / (1.0 + math.exp(-f))
                        g = (label - sig) * lr
                        neu1e += (g * row).astype(np.float32)
                        row += (g * l1).astype(np.float32)
                    l1 += neu1e
            processed += hi - lo
    return rng
