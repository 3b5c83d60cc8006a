"""Prefix and suffix character tries over the substring dictionary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .selection import SubstringDictionary


class _Node:
    __slots__ = ("children", "value")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.value: np.ndarray | None = None  # set iff a key ends here


class Trie:
    def __init__(self):
        self.root = _Node()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, key: str, value: np.ndarray) -> None:
        node = self.root
        for ch in key:
            node = node.children.setdefault(ch, _Node())
        if node.value is None:
            self._size += 1
        node.value = value

    def get(self, key: str) -> np.ndarray | None:
        node = self.root
        for ch in key:
            node = node.children.get(ch)
            if node is None:
                return None
        return node.value

    def longest_prefix(self, text: str) -> tuple[int, np.ndarray | None]:
        """Length and value of the longest key that is a prefix of ``text``."""
        node, best, best_v = self.root, 0, None
        for i, ch in enumerate(text):
            node = node.children.get(ch)
            if node is None:
                break
            if node.value is not None:
                best, best_v = i + 1, node.value
        return best, best_v

    def keys(self) -> Iterator[str]:
        stack = [(self.root, "")]
        while stack:
            node, path = stack.pop()
            if node.value is not None:
                yield path
            for ch, child in node.children.items():
                stack.append((child, path + ch))


LOOKUP_MODES = ("prefix", "suffix", "contains", "exact")


@dataclass
class TriePair:
    dim: int
    prefix_trie: Trie = field(default_factory=Trie)
    suffix_trie: Trie = field(default_factory=Trie)  # keys stored reversed

    def lookup(self, q: str, mode: str) -> tuple[np.ndarray, bool]:
        """Vector of the longest dictionary prefix/suffix of ``q``.

        Returns ``(vector, fallback)``; ``fallback`` is True (with a zero
        vector) when nothing matched.  For ``contains``/``exact`` the longer
        of the two hits is used, the prefix hit winning ties.
        """
        if mode not in LOOKUP_MODES:
            raise ValueError(f"unknown lookup mode {mode!r}")
        n_p, v_p = (0, None) if mode == "suffix" else self.prefix_trie.longest_prefix(q)
        n_s, v_s = (0, None) if mode == "prefix" else self.suffix_trie.longest_prefix(q[::-1])
        if v_p is None and v_s is None:
            return np.zeros(self.dim, dtype=np.float32), True
        if v_s is None or (v_p is not None and n_p >= n_s):
            return v_p, False
        return v_s, False


def build_tries(d: SubstringDictionary) -> TriePair:
    pair = TriePair(d.dim)
    for key in d.keys():
        v = d.vector(key)
        tags = d.provenance.get(key, {"prefix"})
        if "prefix" in tags:
            pair.prefix_trie.insert(key, v)
        if "suffix" in tags:
            pair.suffix_trie.insert(key[::-1], v)
    return pair
