"""Unit-sphere primitives: normalization, geodesic metric, rotations, sampling.

Unit vectors are plain ``float64`` numpy arrays of shape ``(d,)``; batches are
``(n, d)`` arrays with one point per row. Validation helpers enforce the norm
invariant at API boundaries instead of wrapping every vector in a class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroVector

UNIT_TOL = 1e-9
ZERO_TOL = 1e-12

# Rows per random block. Block b of a stream is a pure function of (seed, b),
# so any partition of the index range reproduces the same samples.
BLOCK = 4096


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n <= ZERO_TOL:
        raise ZeroVector(f"vector norm {n:.3g} is below {ZERO_TOL:g}")
    return v / n


def normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = np.linalg.norm(m, axis=-1, keepdims=True)
    if np.any(n <= ZERO_TOL):
        raise ZeroVector("batch contains a row with no direction")
    return m / n


def as_unit(v, *, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``v`` as a float array after checking it lies on the sphere."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] < 2:
        raise DimensionMismatch(f"unit vectors need shape (d,) with d >= 2, got {v.shape}")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"not a unit vector: norm {np.linalg.norm(v)!r}")
    return v


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    v = np.asarray(v, dtype=float)
    return v.ndim == 1 and v.shape[0] >= 2 and abs(np.linalg.norm(v) - 1.0) <= tol


def basis(d: int, i: int) -> np.ndarray:
    e = np.zeros(d)
    e[i] = 1.0
    return e


def geodesic_distance(u, v) -> float:
    """Great-circle distance ``arccos(u . v)`` in radians.

    Evaluated as ``2 * atan2(|u - v|, |u + v|)``, which equals the arccos form
    on the sphere but stays exact at ``u == v`` and accurate near the poles
    where ``u . v`` rounds to +-1.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"dimension mismatch: {u.shape} vs {v.shape}")
    return float(2.0 * np.arctan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))


def sample_uniform_sphere(d: int, n: int, seed: int, *, offset: int = 0) -> np.ndarray:
    """Uniform points on the unit sphere in R^d, one per row.

    Gaussian vectors are normalized, which is rotation invariant in every
    dimension. Row ``offset + i`` depends only on ``(seed, d, offset + i)``,
    so ``sample_uniform_sphere(d, n, s, offset=k)`` equals rows ``k:k+n`` of a
    longer draw with the same seed.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if n < 1:
        raise ValueError("n must be >= 1")
    first, last = offset // BLOCK, (offset + n - 1) // BLOCK
    blocks = [stream(seed, d, b).standard_normal((BLOCK, d)) for b in range(first, last + 1)]
    g = np.concatenate(blocks)[offset - first * BLOCK : offset - first * BLOCK + n]
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a Gaussian row of norm 0 has probability zero; guard anyway
    norms[norms == 0.0] = 1.0
    return g / norms


@dataclass(frozen=True)
class Rotation:
    """An element of SO(d) acting on column vectors."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"rotation matrix must be square, got {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(m.shape[0]))) > UNIT_TOL:
            raise ValueError("matrix is not orthogonal")
        if np.linalg.det(m) < 0:
            raise ValueError("matrix has determinant -1")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate one vector ``(d,)`` or a batch of row vectors ``(n, d)``."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {v.shape[-1]}")
        return v @ self.matrix.T

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T.copy())


def random_rotation(d: int, seed: int) -> Rotation:
    """Haar-distributed rotation: QR of a Gaussian matrix with sign correction."""
    if d < 2:
        raise ValueError("d must be >= 2")
    g = stream(seed, d, 0x0707).standard_normal((d, d))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return Rotation(q)
