"""Overlap and information measures on discrete witness sets.

Witness sets here are finite sets of opaque hashable identifiers. The mutual
information between uniform distributions over two sets takes the joint
entropy to be ``log |A u B|``; under that convention it is an increasing
function of the Jaccard index when the set sizes are fixed.

The sketch is 1-bit minwise hashing: bit j of a signature is one hashed bit
of the set's minimum under the j-th hash function. Two sets agree on a bit
with probability ``J + (1 - J) / 2``: shared minima always collide and the
rest collide by accident half the time. Subtracting that accidental rate
gives the overlap estimate ``2 * agreement - 1``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BothEmpty, EmptySet
from .sphere import stream

_CHUNK = 256


def _as_set(ids) -> frozenset:
    return ids if isinstance(ids, frozenset) else frozenset(ids)


def jaccard(A: Iterable, B: Iterable) -> float:
    A, B = _as_set(A), _as_set(B)
    union = len(A | B)
    if union == 0:
        raise BothEmpty("Jaccard index is undefined for two empty sets")
    return len(A & B) / union


def mutual_information(A: Iterable, B: Iterable) -> float:
    """``log(n m / (n + m - |A n B|))`` in nats."""
    A, B = _as_set(A), _as_set(B)
    n, m = len(A), len(B)
    if n == 0 or m == 0:
        raise EmptySet("mutual information needs two nonempty sets")
    overlap = len(A & B)
    return math.log(n * m / (n + m - overlap))


def mutual_information_from_counts(n: int, m: int, overlap: int) -> float:
    if n < 1 or m < 1:
        raise EmptySet("mutual information needs two nonempty sets")
    if not 0 <= overlap <= min(n, m):
        raise ValueError("overlap must lie in [0, min(n, m)]")
    return math.log(n * m / (n + m - overlap))


# -- hashing --------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    with np.errstate(over="ignore"):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        return x ^ (x >> np.uint64(31))


def _keys(ids) -> np.ndarray:
    """Stable 64-bit keys. Integers map to themselves; anything else is hashed
    from its ``repr`` so keys do not depend on the interpreter's hash seed."""
    if isinstance(ids, np.ndarray) and np.issubdtype(ids.dtype, np.integer):
        return ids.astype(np.uint64)
    items = list(ids)
    if all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in items):
        return np.array([int(x) & 0xFFFFFFFFFFFFFFFF for x in items], dtype=np.uint64)
    out = np.empty(len(items), dtype=np.uint64)
    for i, x in enumerate(items):
        digest = hashlib.blake2b(repr(x).encode(), digest_size=8).digest()
        out[i] = int.from_bytes(digest, "little")
    return out


def _function_seeds(seed: int, m: int) -> np.ndarray:
    base = _mix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]
    with np.errstate(over="ignore"):
        return _mix(np.arange(m, dtype=np.uint64) + base)


@dataclass(frozen=True, eq=False)
class WitnessSketch:
    bits: np.ndarray
    hash_seed: int

    @property
    def m(self) -> int:
        return self.bits.shape[0]

    def prefix(self, m: int) -> "WitnessSketch":
        """The sketch the same set would get with ``m`` bits."""
        return WitnessSketch(self.bits[:m], self.hash_seed)

    def __eq__(self, other):
        if not isinstance(other, WitnessSketch):
            return NotImplemented
        return self.hash_seed == other.hash_seed and np.array_equal(self.bits, other.bits)


def sketch(A, m: int, seed: int = 0) -> WitnessSketch:
    if m < 8:
        raise ValueError("sketches need at least 8 bits")
    keys = _keys(np.unique(A) if isinstance(A, np.ndarray) else _as_set(A))
    if keys.size == 0:
        raise EmptySet("cannot sketch an empty set")
    seeds = _function_seeds(seed, m)
    low = np.full(m, np.iinfo(np.uint64).max, dtype=np.uint64)
    for start in range(0, keys.size, _CHUNK):
        h = _mix(keys[start : start + _CHUNK, None] ^ seeds[None, :])
        np.minimum(low, h.min(axis=0), out=low)
    bits = (_mix(low) & np.uint64(1)).astype(bool)
    return WitnessSketch(bits, seed)


def estimate_overlap(s1: WitnessSketch, s2: WitnessSketch) -> float:
    """Unbiased Jaccard estimate from two sketches built with the same seed."""
    if s1.hash_seed != s2.hash_seed or s1.m != s2.m:
        raise ValueError("sketches must share hash seed and length")
    agreement = float(np.mean(s1.bits == s2.bits))
    return 2.0 * agreement - 1.0


# -- capacity experiment ----------------------------------------------------------


def default_bit_grid(N: int, gap: float, lo: int = 8, per_octave: int = 4) -> list[int]:
    """Quarter-octave grid of sketch lengths reaching past ``12 ln N / gap^2``."""
    hi = 12.0 * math.log(N) / gap**2
    grid = []
    k = 0
    while True:
        m = int(round(lo * 2 ** (k / per_octave)))
        if not grid or m > grid[-1]:
            grid.append(m)
        if m >= hi:
            return grid
        k += 1


@dataclass(frozen=True)
class CapacityResult:
    N: int
    delta_gap: float
    ms: list[int]
    accuracy: list[float]
    m_star: int | None
    trials: int
    realized_gap: float = field(default=0.0)

    def rows(self):
        for m, acc in zip(self.ms, self.accuracy):
            yield (self.N, self.delta_gap, m, acc, int(m == self.m_star))


def plant_sets(N: int, gap: float, rng: np.random.Generator, set_size: int, base_overlap: float):
    """A query set, one true neighbor, and ``N - 1`` decoys.

    All sets have ``set_size`` elements. The neighbor shares enough elements
    with the query for Jaccard ``base_overlap + gap``; each decoy shares enough
    for ``base_overlap``. Shared elements are drawn at random from the query.
    """

    def shared_for(j):
        return int(round(2 * set_size * j / (1 + j)))

    k_near, k_far = shared_for(base_overlap + gap), shared_for(base_overlap)
    query = np.arange(set_size, dtype=np.int64)
    nxt = set_size
    sets = []
    for i in range(N):
        k = k_near if i == 0 else k_far
        shared = rng.choice(set_size, k, replace=False)
        fresh = np.arange(nxt, nxt + set_size - k, dtype=np.int64)
        nxt += set_size - k
        sets.append(np.concatenate([shared, fresh]))
    realized = k_near / (2 * set_size - k_near) - k_far / (2 * set_size - k_far)
    return query, sets, realized


def capacity_experiment(
    N: int,
    delta_gap: float,
    trials: int = 100,
    seed: int = 0,
    *,
    ms: Sequence[int] | None = None,
    set_size: int = 32,
    base_overlap: float = 0.1,
    target: float = 0.95,
) -> CapacityResult:
    """Sketch length needed to rank a planted neighbor first among ``N`` items.

    For each trial the query and all candidates are sketched once at the
    largest length; shorter sketches are prefixes of it. A trial succeeds at
    length ``m`` when the neighbor's estimated overlap is strictly the largest.
    ``m_star`` is the smallest length whose success rate reaches ``target``.
    """
    if N < 16:
        raise ValueError("N must be >= 16")
    if not 0.0 < delta_gap < 0.5:
        raise ValueError("delta_gap must lie in (0, 0.5)")
    ms = sorted(ms) if ms is not None else default_bit_grid(N, delta_gap)
    m_max = ms[-1]
    wins = np.zeros(len(ms))
    realized = 0.0
    for t in range(trials):
        rng = stream(seed, N, int(round(delta_gap * 1e6)), t)
        query, sets, realized = plant_sets(N, delta_gap, rng, set_size, base_overlap)
        hash_seed = int(rng.integers(2**62))
        q = sketch(query, m_max, hash_seed).bits
        S = np.stack([sketch(s, m_max, hash_seed).bits for s in sets])
        agree = np.cumsum(S == q[None, :], axis=1)
        for i, m in enumerate(ms):
            est = 2.0 * agree[:, m - 1] / m - 1.0
            wins[i] += est[0] > est[1:].max()
    acc = (wins / trials).tolist()
    m_star = next((m for m, a in zip(ms, acc) if a >= target), None)
    return CapacityResult(N, delta_gap, list(ms), acc, m_star, trials, realized)


def scaling_constants(results: Iterable[CapacityResult]) -> dict[tuple[int, float], float]:
    """``m* gap^2 / ln N`` per cell; constant across cells under the capacity law."""
    out = {}
    for r in results:
        if r.m_star is not None:
            out[(r.N, r.delta_gap)] = r.m_star * r.delta_gap**2 / math.log(r.N)
    return out


def write_capacity_csv(results: Iterable[CapacityResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "delta_gap", "m", "accuracy", "m_star_flag"])
        for r in results:
            w.writerows(r.rows())
