"""Operand encoders: hash bitmap, and dictionary embedding via the tries."""

from __future__ import annotations

import numpy as np

from .hashing import hash_bitmap
from .trie import TriePair


def like_mode(operand: str) -> tuple[str, str]:
    """Lookup mode and literal for a (possibly LIKE) string operand."""
    if "%" not in operand and "_" not in operand:
        return "exact", operand
    lead, trail = operand.startswith("%"), operand.endswith("%")
    pieces = [p for p in operand.replace("_", "%").split("%") if p]
    if not pieces:
        return "contains", ""
    if len(pieces) == 1 and "_" not in operand:
        body = pieces[0]
        if lead and trail:
            return "contains", body
        if trail:
            return "prefix", body
        if lead:
            return "suffix", body
    # inner wildcards: anchor on the first/last piece when possible
    if not lead and not operand.startswith("_"):
        return "prefix", pieces[0]
    if not trail and not operand.endswith("_"):
        return "suffix", pieces[-1]
    return "contains", max(pieces, key=len)


class HashBitmapEncoder:
    name = "hash"

    def __init__(self, dim: int = 64):
        self.dim = dim

    def encode(self, operand: str) -> np.ndarray:
        return hash_bitmap(like_mode(operand)[1], self.dim)


class DictionaryEncoder:
    """Longest-match trie lookup, hash bitmap when the dictionary misses.

    Skip-gram vectors come out with norms of a few units, well above the
    0/1 scale of every other leaf feature, so hits are rescaled to unit
    length unless ``unit_norm`` is off.
    """

    name = "embed"

    def __init__(self, tries: TriePair, unit_norm: bool = True):
        self.tries = tries
        self.dim = tries.dim
        self.unit_norm = unit_norm
        self.misses = 0

    def encode(self, operand: str) -> np.ndarray:
        mode, body = like_mode(operand)
        v, fallback = self.tries.lookup(body, mode)
        if fallback:
            self.misses += 1
            return hash_bitmap(body, self.dim)
        v = np.asarray(v, dtype=np.float32)
        if self.unit_norm:
            n = float(np.linalg.norm(v))
            if n > 0:
                v = v / n
        return v
