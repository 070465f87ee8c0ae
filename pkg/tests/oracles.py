"""Independent reference computations used as test oracles.

None of these call into the package's solvers: they use brute force,
explicit probability tables, or closed forms worked out by hand.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

# Minimum-norm point of conv{e1, e2, e3} is (1, 1, 1) / 3 by symmetry and
# convexity, so the certificate center is (1, 1, 1) / sqrt(3) and the
# smallest margin is 1 / sqrt(3).
SIMPLEX3_CENTER = np.full(3, 1.0 / math.sqrt(3.0))
SIMPLEX3_MARGIN = 1.0 / math.sqrt(3.0)

# Fraction of S^2 inside the positive octant, and of S^1 inside a quarter arc.
OCTANT_FRACTION = 1.0 / 8.0
QUADRANT_FRACTION = 1.0 / 4.0


def entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mi_entropy_oracle(n: int, m: int, overlap: int) -> float:
    """Mutual information from explicit entropy tables.

    Marginals are uniform on A (size n) and on B (size m); the joint is taken
    uniform on A u B, which has ``n + m - overlap`` atoms.
    """
    ha = entropy(np.full(n, 1.0 / n))
    hb = entropy(np.full(m, 1.0 / m))
    u = n + m - overlap
    hab = entropy(np.full(u, 1.0 / u))
    return ha + hb - hab


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def circle_grid(n: int) -> np.ndarray:
    t = 2.0 * math.pi * np.arange(n) / n
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def grid_directions(d: int, n: int = 100_000) -> np.ndarray:
    if d == 2:
        return circle_grid(n)
    if d == 3:
        return fibonacci_sphere(n)
    raise ValueError("grid oracle covers d in {2, 3}")


def brute_force_margin(V: np.ndarray, n_grid: int = 100_000, refine: int = 8) -> float:
    """Largest ``min_i c . w_i`` over unit ``c``: grid search then local polish.

    Positive means some open hemisphere holds every witness. The grid's best
    few directions are polished with Nelder-Mead on the normalized margin.
    """
    V = np.asarray(V, dtype=float)
    G = grid_directions(V.shape[1], n_grid)
    margins = (G @ V.T).min(axis=1)
    best = float(margins.max())
    for k in np.argsort(-margins)[:refine]:
        res = minimize(
            lambda c: -float((V @ c).min()) / max(np.linalg.norm(c), 1e-300),
            G[k],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000},
        )
        best = max(best, -float(res.fun))
    return best


def hull_point(V: np.ndarray, weights: np.ndarray) -> np.ndarray:
    x = weights @ V
    return x / np.linalg.norm(x)


def geodesic_grid_argmax(f, n_grid: int = 100_000) -> tuple[np.ndarray, float]:
    """Maximizer of ``f`` over a Fibonacci grid on S^2."""
    G = fibonacci_sphere(n_grid)
    vals = np.array([f(g) for g in G])
    k = int(np.argmax(vals))
    return G[k], float(vals[k])
