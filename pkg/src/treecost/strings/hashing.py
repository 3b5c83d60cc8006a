"""Character-set hash bitmaps, the fallback encoding for strings."""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193


def char_hash(ch: str) -> int:
    """32-bit FNV-1a over the UTF-8 bytes of one character."""
    h = _FNV_OFFSET
    for byte in ch.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFF
    return h


def hash_bitmap(s: str, length: int) -> np.ndarray:
    if length < 1:
        raise ValueError("bitmap length must be >= 1")
    out = np.zeros(length, dtype=np.float32)
    for ch in set(s):
        out[char_hash(ch) % length] = 1.0
    return out
