import numpy as np
import pytest

from treecost.catalog import Database, SampleStore
from treecost.features import Featurizer
from treecost.strings import HashBitmapEncoder
from treecost.train.data import DatasetConfig, build_catalog, generate_dataset

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")


def tiny_db() -> Database:
    """Two small hand-written tables joined on title.id = movie_info.movie_id."""
    title = {
        "title.id": np.arange(6, dtype=np.int64),
        "title.production_year": np.array([1990, 1995, 2000, 2005, 2010, 2015], dtype=np.int64),
        "title.kind_id": np.array([1, 2, 1, 3, 1, 2], dtype=np.int64),
        "title.title": np.array(["Dinos in Kas", "The Red Fox", "Dino Park", "Return of Kas",
                                 "Fox and Hound", "Kas"], dtype=object),
    }
    info = {
        "movie_info.id": np.arange(8, dtype=np.int64),
        "movie_info.movie_id": np.array([0, 0, 1, 2, 2, 2, 4, 5], dtype=np.int64),
        "movie_info.info": np.array(["(2002-06-29)", "(2003-08-11)", "Color", "Drama", "(2006-01-02)",
                                     "Black and White", "Comedy", "(2008-06-01)"], dtype=object),
    }
    tables = {"title": title, "movie_info": info}
    return Database(build_catalog(tables), tables)


@pytest.fixture
def tiny():
    return tiny_db()


@pytest.fixture(scope="session")
def small_db():
    return generate_dataset(DatasetConfig(titles=400, infos=500, seed=3))


@pytest.fixture(scope="session")
def small_featurizer(small_db):
    return Featurizer(small_db.catalog, SampleStore.build(small_db, size=50, seed=0), HashBitmapEncoder(16))
