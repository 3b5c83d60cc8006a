"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The Cython extension ``treecost._kernels`` is used when it has been built;
set ``TREECOST_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` reports
which one was selected.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("TREECOST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def like_mask(values, pattern: str) -> np.ndarray:
    return _impl.like_mask(values, pattern)


def sgns_train(w_in, w_out, tokens, offsets, noise_table, negative, lr_start, lr_end, epochs, seed) -> int:
    return _impl.sgns_train(
        w_in,
        w_out,
        np.ascontiguousarray(tokens, dtype=np.int32),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(noise_table, dtype=np.int32),
        int(negative),
        float(lr_start),
        float(lr_end),
        int(epochs),
        int(seed),
    )
