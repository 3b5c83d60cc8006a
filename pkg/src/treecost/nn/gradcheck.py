"""Central-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .autodiff import Var


def grad_check(f: Callable[[], Var], params: dict[str, Var], h: float | Sequence[float] = 1e-3,
               max_coords: int | None = None, seed: int = 0) -> float:
    """Max relative error between backprop and central differences.

    ``f`` rebuilds the graph from the current parameter values and returns
    a scalar.  Parameters should be float64 for a meaningful comparison.
    With ``max_coords`` a random subset of coordinates is checked per param.

    ``h`` may list several step sizes; each coordinate then keeps its best
    agreement.  A ReLU or min/max kink within one step of the current point
    spoils that step only, while a wrong backward rule disagrees at all of them.
    """
    steps = (h,) if isinstance(h, (int, float)) else tuple(h)
    for p in params.values():
        p.grad = None
    f().backward()
    analytic = {k: (p.grad if p.grad is not None else np.zeros_like(p.value)).copy() for k, p in params.items()}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k, p in params.items():
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            a = float(analytic[k].reshape(-1)[i])
            best = float("inf")
            old = flat[i]
            for step in steps:
                flat[i] = old + step
                up = float(f().value)
                flat[i] = old - step
                down = float(f().value)
                flat[i] = old
                num = (up - down) / (2 * step)
                best = min(best, abs(a - num) / max(1e-8, abs(a) + abs(num)))
            worst = max(worst, best)
    return worst
