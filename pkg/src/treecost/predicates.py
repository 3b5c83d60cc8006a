"""Vectorised evaluation of predicate trees over column arrays."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from . import kernels
from .plan import ColumnRef, PredicateNode


class PredicateTypeError(TypeError):
    """Operand type does not fit the column type."""


def _is_string_column(values: np.ndarray) -> bool:
    return values.dtype == object or values.dtype.kind in "US"


def evaluate(p: PredicateNode, columns: Mapping[str, np.ndarray], n_rows: int) -> np.ndarray:
    """Boolean mask of the rows satisfying ``p``."""
    if p.kind == "and":
        out = np.ones(n_rows, dtype=bool)
        for c in p.children:
            out &= evaluate(c, columns, n_rows)
        return out
    if p.kind == "or":
        out = np.zeros(n_rows, dtype=bool)
        for c in p.children:
            out |= evaluate(c, columns, n_rows)
        return out
    if p.column not in columns:
        raise KeyError(f"column {p.column!r} not available")
    values = columns[p.column]
    op, v = p.operator, p.operand
    if isinstance(v, ColumnRef):
        if v.name not in columns:
            raise KeyError(f"column {v.name!r} not available")
        other = columns[v.name]
        if op == "=":
            return values == other
        if op == "!=":
            return values != other
        if op == ">":
            return values > other
        if op == "<":
            return values < other
        raise PredicateTypeError(f"{op} between columns is not supported")
    if _is_string_column(values):
        if op in ("=", "!=", "LIKE", "NOT LIKE"):
            if not isinstance(v, str):
                raise PredicateTypeError(f"{p.column} is a string column, operand {v!r} is not")
            if op == "=":
                return np.fromiter((x == v for x in values), dtype=bool, count=len(values))
            if op == "!=":
                return np.fromiter((x != v for x in values), dtype=bool, count=len(values))
            m = kernels.like_mask(values, v)
            return m if op == "LIKE" else ~m
        raise PredicateTypeError(f"operator {op} not supported on string column {p.column}")
    if isinstance(v, str):
        raise PredicateTypeError(f"{p.column} is numeric, operand {v!r} is a string")
    if op == "=":
        return values == v
    if op == "!=":
        return values != v
    if op == ">":
        return values > v
    if op == "<":
        return values < v
    raise PredicateTypeError(f"operator {op} not supported on numeric column {p.column}")
