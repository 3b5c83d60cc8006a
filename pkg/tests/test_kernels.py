import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treecost import _kernels_py, kernels
from treecost.train.oracle import like

compiled = pytest.importorskip("treecost._kernels")

ALPHABET = "ab%_-"


def test_backend_reports_compiled():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("pattern, expect", [
    ("Din%", [True, False, True, False]),
    ("%Kas", [True, False, False, True]),
    ("%in%", [True, False, True, False]),
    ("D_no%", [True, False, True, False]),
    ("Kas", [False, False, False, True]),
    ("%", [True, True, True, True]),
    ("", [False, False, False, False]),
])
def test_like_examples(pattern, expect):
    values = np.array(["Dinos in Kas", "The Red Fox", "Dino Park", "Kas"], dtype=object)
    assert compiled.like_mask(values, pattern).tolist() == expect
    assert _kernels_py.like_mask(values, pattern).tolist() == expect


@settings(max_examples=300, deadline=None)
@given(st.lists(st.text(ALPHABET[:3] + "c", max_size=8), min_size=1, max_size=10), st.text(ALPHABET, max_size=6))
def test_like_backends_agree_with_oracle(values, pattern):
    arr = np.array(values, dtype=object)
    want = [like(v, pattern) for v in values]
    assert compiled.like_mask(arr, pattern).tolist() == want
    assert _kernels_py.like_mask(arr, pattern).tolist() == want


def _sgns_inputs(seed):
    rng = np.random.default_rng(seed)
    vocab, dim = 12, 8
    lengths = rng.integers(1, 6, size=30)
    tokens = rng.integers(0, vocab, size=int(lengths.sum())).astype(np.int32)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    w_in = ((rng.random((vocab, dim)) - 0.5) / dim).astype(np.float32)
    table = np.repeat(np.arange(vocab, dtype=np.int32), 10)
    return w_in, tokens, offsets, table


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sgns_backends_agree(seed):
    w_in, tokens, offsets, table = _sgns_inputs(seed)
    outs = []
    for impl in (compiled, _kernels_py):
        a, b = w_in.copy(), np.zeros_like(w_in)
        state = impl.sgns_train(a, b, tokens, offsets, table, 5, 0.025, 0.0001, 3, seed + 7)
        outs.append((a, b, state))
    (a1, b1, s1), (a2, b2, s2) = outs
    assert s1 == s2
    assert np.allclose(a1, a2, atol=1e-6) and np.allclose(b1, b2, atol=1e-6)
    assert not np.array_equal(a1, w_in)


def test_sgns_zero_epochs_is_identity():
    w_in, tokens, offsets, table = _sgns_inputs(0)
    a = w_in.copy()
    compiled.sgns_train(a, np.zeros_like(a), tokens, offsets, table, 5, 0.025, 0.0001, 0, 1)
    assert np.array_equal(a, w_in)


def test_sgns_large_logits_do_not_overflow():
    w_in = np.full((2, 4), 20.0, dtype=np.float32)
    w_out = np.full((2, 4), -20.0, dtype=np.float32)
    tokens = np.array([0, 1], dtype=np.int32)
    offsets = np.array([0, 2], dtype=np.int64)
    table = np.array([0, 1], dtype=np.int32)
    for impl in (compiled, _kernels_py):
        a, b = w_in.copy(), w_out.copy()
        impl.sgns_train(a, b, tokens, offsets, table, 1, 0.025, 0.025, 1, 3)
        assert np.isfinite(a).all() and np.isfinite(b).all()


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = {**os.environ, "TREECOST_PURE_PYTHON": "1"}
    r = subprocess.run([sys.executable, "-c", "from treecost import kernels; print(kernels.BACKEND)"],
                       capture_output=True, text=True, env=env)
    assert r.stdout.strip() == "python"
