"""Synthetic movie-style database with PK-FK joins and correlated columns.

``title`` holds one row per movie with a production year, a season number
that tracks the year closely, a skewed kind id and a templated title.
``movie_info`` references titles (recent movies get more rows) and stores
either a release date string ``(YYYY-MM-DD)`` near the movie's year or a
short descriptive phrase.  ``cast_info`` is optional.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..catalog import ColumnInfo, Database, IndexInfo, SchemaCatalog, TableInfo

_ONSETS = ["D", "K", "M", "T", "S", "B", "R", "L", "N", "V", "Gr", "Br", "St", "Pl", "Ch", "Z"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["n", "s", "r", "l", "m", "x", "nd", "st", "ck", ""]
_PLACES = ["Kas", "Rome", "Paris", "Oslo", "Lima", "Cairo", "Tokyo", "Delhi", "Quito", "Perth", "Bern", "Dakar"]
_PHRASES = [
    "Color", "Black and White", "English", "German", "French", "Spanish", "Italian", "Mono", "Stereo",
    "Dolby Digital", "Silent", "Drama", "Comedy", "Short", "Documentary", "Thriller", "Horror", "Western",
]
_TEMPLATES = ["{a} in {p}", "The {a} {b}", "{a} of the {b}", "{a}", "Return of {a}", "{a} and {b}", "{a}os in {p}"]


@dataclass
class DatasetConfig:
    titles: int = 10_000
    infos: int = 10_000
    casts: int = 0  # 0 leaves cast_info out
    vocabulary: int = 300
    zipf: float = 1.15
    seed: int = 0


def _vocabulary(rng: np.random.Generator, n: int) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < n:
        k = rng.integers(1, 4)
        w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(k)) + rng.choice(_CODAS)
        w = w[0] + w[1:].lower()
        if w not in seen and len(w) >= 3:
            seen.add(w)
            words.append(w)
    return words


def _zipf_choice(rng: np.random.Generator, n: int, size: int, s: float) -> np.ndarray:
    p = 1.0 / np.arange(1, n + 1) ** s
    return rng.choice(n, size=size, p=p / p.sum())


def build_catalog(tables: dict[str, dict[str, np.ndarray]]) -> SchemaCatalog:
    tinfo, cinfo = [], []
    for t, cols in tables.items():
        tinfo.append(TableInfo(t, len(cols[f"{t}.id"]), f"{t}.id"))
        for name, v in cols.items():
            if v.dtype == object:
                cinfo.append(ColumnInfo(name, "string"))
            else:
                cinfo.append(ColumnInfo(name, "numeric", float(v.min()), float(v.max())))
    idx = [IndexInfo(f"{t}_pkey", f"{t}.id") for t in tables]
    joins = []
    for t in tables:
        if t != "title":
            idx.append(IndexInfo(f"{t}_movie_id_idx", f"{t}.movie_id"))
            joins.append(("title.id", f"{t}.movie_id"))
    return SchemaCatalog(tinfo, cinfo, idx, joins)


def generate_dataset(cfg: DatasetConfig | None = None, seed: int | None = None) -> Database:
    cfg = cfg or DatasetConfig()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = cfg.titles
    vocab = _vocabulary(rng, cfg.vocabulary)

    year = np.clip(np.round(2020 - rng.gamma(2.0, 12.0, size=n)), 1900, 2020).astype(np.int64)
    season = np.clip(np.round((year - 1900) / 6 + rng.normal(0, 2.0, size=n)), 0, None).astype(np.int64)
    kind = (_zipf_choice(rng, 7, n, 1.3) + 1).astype(np.int64)
    # word choice shifts with kind, so strings and kind are related
    wa = (_zipf_choice(rng, len(vocab), n, cfg.zipf) + kind * 13) % len(vocab)
    wb = (_zipf_choice(rng, len(vocab), n, cfg.zipf) + kind * 29) % len(vocab)
    tmpl = rng.integers(0, len(_TEMPLATES), size=n)
    place = rng.integers(0, len(_PLACES), size=n)
    titles = np.array(
        [_TEMPLATES[tmpl[i]].format(a=vocab[wa[i]], b=vocab[wb[i]], p=_PLACES[place[i]]) for i in range(n)],
        dtype=object,
    )
    tables: dict[str, dict[str, np.ndarray]] = {
        "title": {
            "title.id": np.arange(n, dtype=np.int64),
            "title.production_year": year,
            "title.season_nr": season,
            "title.kind_id": kind,
            "title.title": titles,
        }
    }

    # more info rows for recent titles: FK weight grows with the year
    w = np.exp((year - 1900) / 25.0)
    m = cfg.infos
    movie = rng.choice(n, size=m, p=w / w.sum()).astype(np.int64)
    itype = (_zipf_choice(rng, 20, m, 1.1) + 1).astype(np.int64)
    is_date = itype <= 8
    off = rng.integers(0, 3, size=m)
    month = rng.integers(1, 13, size=m)
    day = rng.integers(1, 29, size=m)
    phrase = _zipf_choice(rng, len(_PHRASES), m, 1.0)
    info = np.array(
        [
            f"({year[movie[i]] + off[i]:04d}-{month[i]:02d}-{day[i]:02d})" if is_date[i] else _PHRASES[phrase[i]]
            for i in range(m)
        ],
        dtype=object,
    )
    tables["movie_info"] = {
        "movie_info.id": np.arange(m, dtype=np.int64),
        "movie_info.movie_id": movie,
        "movie_info.info_type_id": itype,
        "movie_info.info": info,
    }

    if cfg.casts:
        c = cfg.casts
        cm = rng.choice(n, size=c, p=w / w.sum()).astype(np.int64)
        role = (_zipf_choice(rng, 11, c, 1.2) + 1).astype(np.int64)
        nr = np.clip(np.round(rng.exponential(6.0, size=c)), 1, 80).astype(np.int64)
        tables["cast_info"] = {
            "cast_info.id": np.arange(c, dtype=np.int64),
            "cast_info.movie_id": cm,
            "cast_info.role_id": role,
            "cast_info.nr_order": nr,
        }
    return Database(build_catalog(tables), tables)


CORRELATED_PAIR = ("title.production_year", "title.season_nr")


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.corrcoef(a.astype(np.float64), b.astype(np.float64))[0, 1])
