"""Schema catalog, in-memory tables and per-table row samples.

Catalog text format (one declaration per line, ``#`` starts a comment)::

    table <name> rows=<n> pk=<table.column>
    column <table.column> numeric min=<v> max=<v>
    column <table.column> string
    index <name> on <table.column>
    join <table.column> <table.column>

Tables and samples are stored as ``.npz`` archives; each carries a JSON
``__header__`` entry so files are self-describing.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class TableInfo:
    name: str
    rows: int
    primary_key: str | None = None


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    kind: str  # "numeric" | "string"
    min: float | None = None
    max: float | None = None

    @property
    def table(self) -> str:
        return self.name.split(".", 1)[0]


@dataclass(frozen=True)
class IndexInfo:
    name: str
    column: str

    @property
    def table(self) -> str:
        return self.column.split(".", 1)[0]


@dataclass
class SchemaCatalog:
    tables: list[TableInfo] = field(default_factory=list)
    columns: list[ColumnInfo] = field(default_factory=list)
    indexes: list[IndexInfo] = field(default_factory=list)
    joins: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self._reindex()

    def _reindex(self):
        self.table_pos = {t.name: i for i, t in enumerate(self.tables)}
        self.column_pos = {c.name: i for i, c in enumerate(self.columns)}
        self.index_pos = {x.name: i for i, x in enumerate(self.indexes)}
        self._tables = {t.name: t for t in self.tables}
        self._columns = {c.name: c for c in self.columns}

    def table(self, name: str) -> TableInfo:
        try:
            return self._tables[name]
        except KeyError:
            raise CatalogError(f"unknown table {name!r}") from None

    def column(self, name: str) -> ColumnInfo:
        try:
            return self._columns[name]
        except KeyError:
            raise CatalogError(f"unknown column {name!r}") from None

    def columns_of(self, table: str) -> list[ColumnInfo]:
        return [c for c in self.columns if c.table == table]

    def indexes_on(self, column: str) -> list[IndexInfo]:
        return [x for x in self.indexes if x.column == column]

    def join_condition(self, a: str, b: str) -> tuple[str, str] | None:
        """The FK edge between tables ``a`` and ``b``, oriented a -> b."""
        for x, y in self.joins:
            if x.split(".")[0] == a and y.split(".")[0] == b:
                return x, y
            if y.split(".")[0] == a and x.split(".")[0] == b:
                return y, x
        return None

    def neighbours(self, table: str) -> list[str]:
        out = []
        for x, y in self.joins:
            tx, ty = x.split(".")[0], y.split(".")[0]
            if tx == table:
                out.append(ty)
            elif ty == table:
                out.append(tx)
        return sorted(set(out))

    # ------------------------------------------------------------ text format

    def dumps(self) -> str:
        lines = ["# treecost schema v1"]
        for t in self.tables:
            pk = f" pk={t.primary_key}" if t.primary_key else ""
            lines.append(f"table {t.name} rows={t.rows}{pk}")
        for c in self.columns:
            if c.kind == "numeric":
                lines.append(f"column {c.name} numeric min={c.min!r} max={c.max!r}")
            else:
                lines.append(f"column {c.name} string")
        for x in self.indexes:
            lines.append(f"index {x.name} on {x.column}")
        for a, b in self.joins:
            lines.append(f"join {a} {b}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SchemaCatalog":
        tables, columns, indexes, joins = [], [], [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            head, args = parts[0], parts[1:]
            kv = dict(a.split("=", 1) for a in args if "=" in a)
            pos = [a for a in args if "=" not in a]
            try:
                if head == "table":
                    tables.append(TableInfo(pos[0], int(kv["rows"]), kv.get("pk")))
                elif head == "column":
                    if pos[1] == "numeric":
                        columns.append(ColumnInfo(pos[0], "numeric", float(kv["min"]), float(kv["max"])))
                    elif pos[1] == "string":
                        columns.append(ColumnInfo(pos[0], "string"))
                    else:
                        raise CatalogError(f"unknown column kind {pos[1]!r}")
                elif head == "index":
                    if len(pos) != 3 or pos[1] != "on":
                        raise CatalogError("expected: index <name> on <table.column>")
                    indexes.append(IndexInfo(pos[0], pos[2]))
                elif head == "join":
                    joins.append((pos[0], pos[1]))
                else:
                    raise CatalogError(f"unknown declaration {head!r}")
            except (IndexError, KeyError, ValueError) as e:
                raise CatalogError(f"schema line {lineno}: {raw.strip()!r}: {e}") from None
        return cls(tables, columns, indexes, joins)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "SchemaCatalog":
        return cls.loads(Path(path).read_text())

    def fingerprint(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]


def _write_npz(path: Path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    """``np.savez`` layout with fixed zip timestamps, so equal data gives equal bytes."""
    payload = {"__header__": np.array(json.dumps(header, sort_keys=True))}
    for k, v in arrays.items():
        payload[k] = v.astype(str) if v.dtype == object else v
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for k in sorted(payload):
            info = zipfile.ZipInfo(k + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(payload[k]), allow_pickle=False)
            zf.writestr(info, buf.getvalue())


def _read_npz(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        arrays = {}
        for k in z.files:
            if k == "__header__":
                continue
            a = z[k]
            arrays[k] = a.astype(object) if a.dtype.kind == "U" else a
    return header, arrays


@dataclass
class Database:
    """Column arrays per table; string columns are object arrays of ``str``."""

    catalog: SchemaCatalog
    tables: dict[str, dict[str, np.ndarray]]

    def rows(self, table: str) -> int:
        cols = self.tables[table]
        return len(next(iter(cols.values()))) if cols else 0

    def column(self, name: str) -> np.ndarray:
        t, _ = name.split(".", 1)
        try:
            return self.tables[t][name]
        except KeyError:
            raise CatalogError(f"unknown column {name!r}") from None

    def save(self, data_dir: str | Path) -> None:
        d = Path(data_dir)
        d.mkdir(parents=True, exist_ok=True)
        self.catalog.save(d / "schema.txt")
        for t, cols in self.tables.items():
            _write_npz(d / f"{t}.npz", {"table": t, "format": 1}, cols)

    @classmethod
    def load(cls, data_dir: str | Path) -> "Database":
        d = Path(data_dir)
        catalog = SchemaCatalog.load(d / "schema.txt")
        tables = {}
        for t in catalog.tables:
            header, arrays = _read_npz(d / f"{t.name}.npz")
            if header.get("table") != t.name:
                raise CatalogError(f"{t.name}.npz holds table {header.get('table')!r}")
            tables[t.name] = arrays
        return cls(catalog, tables)


@dataclass
class SampleStore:
    """A fixed uniform sample of at most ``size`` rows per table."""

    size: int
    seed: int
    rows: dict[str, np.ndarray]  # sampled row ids, ascending
    columns: dict[str, dict[str, np.ndarray]]

    @classmethod
    def build(cls, db: Database, size: int = 1000, seed: int = 0) -> "SampleStore":
        rows, columns = {}, {}
        for t in db.catalog.tables:
            n = db.rows(t.name)
            # per-table stream so adding a table leaves other samples unchanged
            rng = np.random.default_rng([seed, len(t.name)] + [ord(c) for c in t.name])
            ids = np.sort(rng.choice(n, size=min(size, n), replace=False)) if n else np.zeros(0, np.int64)
            rows[t.name] = ids.astype(np.int64)
            columns[t.name] = {c: v[ids] for c, v in db.tables[t.name].items()}
        return cls(size, seed, rows, columns)

    def sample_count(self, table: str) -> int:
        return len(self.rows[table])

    def save(self, path: str | Path) -> None:
        arrays, layout = {}, {}
        for t, cols in self.columns.items():
            arrays[f"{t}/__rows__"] = self.rows[t]
            for c, v in cols.items():
                arrays[f"{t}/{c}"] = v
            layout[t] = sorted(cols)
        _write_npz(Path(path), {"S": self.size, "seed": self.seed, "tables": layout}, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "SampleStore":
        header, arrays = _read_npz(Path(path))
        rows, columns = {}, {}
        for t, cols in header["tables"].items():
            rows[t] = arrays[f"{t}/__rows__"]
            columns[t] = {c: arrays[f"{t}/{c}"] for c in cols}
        return cls(int(header["S"]), int(header["seed"]), rows, columns)
