"""
Routines for optimizing over the probability simplex.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .jobs import parallel_map

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto {x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    r = idx[cond][-1]
    theta = css[cond][-1] / r
    x = np.maximum(v - theta, 0.0)
    return x / x.sum()


def vertices(k: int) -> list[np.ndarray]:
    return [np.eye(k)[i] for i in range(k)]


def dirichlet_starts(k: int, count: int, seed: int) -> list[np.ndarray]:
    if count <= 0:
        return []
    rng = np.random.default_rng(seed)
    return list(rng.dirichlet(np.ones(k), size=count))


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool


def projected_ascent(
    f: Objective,
    grad: Gradient,
    x0: np.ndarray,
    max_iters: int = 2000,
    tolerance: float = 1e-12,
    step: float = 1.0,
) -> AscentResult:
    """
    Maximize f over the simplex by projected gradient with Armijo backtracking.

    Stops when the Frank-Wolfe gap max(g) - g.x is within tolerance, when a
    step no longer improves f by more than tolerance, or when the projected
    step is below tolerance in sup norm.
    """
    x = project_simplex(x0)
    fx = f(x)
    t = step
    for it in range(1, max_iters + 1):
        g = grad(x)
        if not np.all(np.isfinite(g)):
            g = np.nan_to_num(g, nan=0.0, posinf=1e300, neginf=-1e300)
        elif float(np.max(g) - g @ x) <= tolerance:
            return AscentResult(x, fx, it, True)
        improved = False
        while t > 1e-16:
            y = project_simplex(x + t * g)
            d = y - x
            fy = f(y)
            if np.isfinite(fy) and fy >= fx + 1e-4 * float(g @ d):
                improved = True
                break
            t *= 0.5
        if not improved:
            return AscentResult(x, fx, it, True)
        gain = fy - fx
        x, fx = y, fy
        if gain <= tolerance and np.max(np.abs(d)) <= np.sqrt(tolerance):
            return AscentResult(x, fx, it, True)
        t = min(t * 2.0, 1e6)
    return AscentResult(x, fx, max_iters, False)


def multistart(
    f: Objective,
    grad: Gradient,
    starts: Iterable[np.ndarray],
    max_iters: int = 2000,
    tolerance: float = 1e-12,
) -> Optional[AscentResult]:
    """Best result over all starts; ties keep the earliest start."""
    results = parallel_map(
        lambda x0: projected_ascent(f, grad, x0, max_iters=max_iters, tolerance=tolerance),
        list(starts),
    )
    best: Optional[AscentResult] = None
    for r in results:
        if best is None or r.value > best.value:
            best = r
    if best is not None and not any(r.converged for r in results):
        logger.debug("no start met the stopping rule after %d iterations", max_iters)
    return best
