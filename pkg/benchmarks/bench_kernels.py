"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--rows 100000] [--repeat 3]

Prints one line per kernel with the best-of-N wall time of each backend and
the speedup.  Both backends are imported directly, so the choice made by
``treecost.kernels`` at import time does not matter here.
"""

import argparse
import sys
import time

import numpy as np

from treecost import _kernels_py
from treecost.strings.skipgram import noise_table
from treecost.train.data import DatasetConfig, generate_dataset

try:
    from treecost import _kernels
except ImportError:
    _kernels = None

PATTERNS = ["%Kas%", "Din%", "%(19%-0_-%", "The _ed%"]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_like(values, repeat):
    def run(mod):
        return lambda: [mod.like_mask(values, p) for p in PATTERNS]

    return run(_kernels_py), run(_kernels) if _kernels else None


def sgns_inputs(n_sent, vocab, dim, seed=0):
    rng = np.random.default_rng(seed)
    lengths = rng.integers(2, 8, size=n_sent)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    tokens = rng.integers(0, vocab, size=int(offsets[-1])).astype(np.int32)
    table = noise_table(np.bincount(tokens, minlength=vocab) + 1)
    w_in = ((rng.random((vocab, dim)) - 0.5) / dim).astype(np.float32)
    return w_in, tokens, offsets, table


def bench_sgns(n_sent, repeat):
    w_in, tokens, offsets, table = sgns_inputs(n_sent, vocab=500, dim=32)

    def run(mod):
        def go():
            a, b = w_in.copy(), np.zeros_like(w_in)
            mod.sgns_train(a, b, tokens, offsets, table, 5, 0.025, 2.5e-6, 1, 7)
        return go

    return run(_kernels_py), run(_kernels) if _kernels else None


def report(name, py, cy, repeat):
    t_py = best_of(py, repeat)
    if cy is None:
        print(f"{name:<12} python {t_py:8.3f}s   cython  (not built)")
        return
    t_cy = best_of(cy, repeat)
    print(f"{name:<12} python {t_py:8.3f}s   cython {t_cy:8.3f}s   speedup {t_py / t_cy:6.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=100_000, help="title rows for the LIKE benchmark")
    ap.add_argument("--sentences", type=int, default=2_000, help="sentences for the skip-gram benchmark")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    db = generate_dataset(DatasetConfig(titles=args.rows, infos=10, seed=0))
    values = list(db.column("title.title"))
    report("like_mask", *bench_like(values, args.repeat), args.repeat)
    report("sgns_train", *bench_sgns(args.sentences, args.repeat), args.repeat)
    return 0


if __name__ == "__main__":
    sys.exit(main())
