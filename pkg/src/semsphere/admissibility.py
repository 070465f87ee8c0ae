"""Witness sets, hemisphere feasibility, and the admissible region.

Two region constructions live here side by side:

* :class:`AdmissibleRegion` is the spherical convex hull of the witnesses,
  the set of normalized nonnegative combinations. It grows as witnesses are
  added and is what interpretation searches over.
* :class:`CapRegion` is an intersection of per-witness spherical caps. It
  shrinks as witnesses are added, which is the form under which "more
  evidence never increases ambiguity" holds literally.

Neither is substituted for the other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.special import betainc

from .errors import (
    ContradictionError,
    DimensionMismatch,
    EmptySampleBudget,
    ToleranceOutOfRange,
    UnreliableEstimate,
)
from .sphere import (
    BLOCK,
    UNIT_TOL,
    Rotation,
    normalize_rows,
    sample_uniform_sphere,
    stream,
)

DEFAULT_TOL = 1e-6
MAX_REL_ERROR = 0.5

# Rejection-sampling budget for sample_region and the acceptance rate below
# which it switches to hull-weight sampling.
PROPOSAL_BUDGET = 1_000_000
MIN_ACCEPTANCE = 1e-4

_FW_MAX_ITER = 20_000
_POLISH_EVERY = 16


class WitnessSet:
    """Ordered, duplicate-free set of unit witness vectors.

    Bitwise-identical vectors are stored once; their provenance labels are
    merged onto the surviving entry.
    """

    __slots__ = ("_vectors", "_sources")

    def __init__(self, vectors, labels=None):
        v = np.array(vectors, dtype=float, ndmin=2)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("a witness set needs at least one vector")
        if v.shape[1] < 2:
            raise DimensionMismatch("witness dimension must be >= 2")
        norms = np.linalg.norm(v, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            raise ValueError(f"witness {bad[0]} is not a unit vector (norm {norms[bad[0]]!r})")
        if labels is None:
            labels = [None] * len(v)
        if len(labels) != len(v):
            raise ValueError("labels must match the number of witnesses")

        keep: list[int] = []
        sources: list[list[str]] = []
        seen: dict[bytes, int] = {}
        for i, row in enumerate(v):
            key = row.tobytes()
            label = labels[i]
            if key in seen:
                slot = seen[key]
                if label is not None and label not in sources[slot]:
                    sources[slot].append(label)
                continue
            seen[key] = len(keep)
            keep.append(i)
            sources.append([] if label is None else [label])
        self._vectors = v[keep].copy()
        self._vectors.setflags(write=False)
        self._sources = tuple(tuple(s) for s in sources)

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def sources(self) -> tuple[tuple[str, ...], ...]:
        return self._sources

    @property
    def labels(self) -> list[str]:
        return ["+".join(s) for s in self._sources]

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    def __len__(self) -> int:
        return self._vectors.shape[0]

    def __iter__(self):
        return iter(self._vectors)

    def __getitem__(self, i) -> np.ndarray:
        return self._vectors[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WitnessSet):
            return NotImplemented
        return (
            self._vectors.shape == other._vectors.shape
            and np.array_equal(self._vectors, other._vectors)
            and self._sources == other._sources
        )

    def __repr__(self) -> str:
        return f"WitnessSet(n={len(self)}, d={self.dim})"

    def rotated(self, g: Rotation) -> "WitnessSet":
        return WitnessSet(g.apply(self._vectors), self._flat_labels())

    def extended(self, vectors, labels=None) -> "WitnessSet":
        extra = np.array(vectors, dtype=float, ndmin=2)
        new_labels = None
        if labels is not None or any(self._sources):
            new_labels = self._flat_labels() + list(labels or [None] * len(extra))
        return WitnessSet(np.vstack([self._vectors, extra]), new_labels)

    def _flat_labels(self) -> list[str | None]:
        return ["+".join(s) if s else None for s in self._sources]


class Status(str, enum.Enum):
    COHERENT = "Coherent"
    CONTRADICTORY = "Contradictory"


@dataclass(frozen=True)
class FeasibilityCertificate:
    status: Status
    center: np.ndarray | None
    min_margin: float | None
    witness_pair: tuple[int, int] | None
    min_norm: float
    weights: np.ndarray = field(repr=False)
    iterations: int = 0
    gap: float = 0.0
    generator_count: int = 0

    @property
    def coherent(self) -> bool:
        return self.status is Status.COHERENT

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "center": None if self.center is None else self.center.tolist(),
            "min_margin": self.min_margin,
            "witness_pair": None if self.witness_pair is None else list(self.witness_pair),
            "generator_count": self.generator_count,
            "min_norm": self.min_norm,
        }


def min_norm_point(gram: np.ndarray, gap_tol: float, stop_below: float = 0.0, max_iter: int = _FW_MAX_ITER):
    """Minimum-norm point of a convex hull, in barycentric weights.

    Away-step Frank-Wolfe on ``f(a) = 0.5 * a^T G a`` over the simplex, with
    exact line search. Works entirely from the Gram matrix, so the result is
    invariant under rotations of the points. Every ``_POLISH_EVERY`` steps the
    affine minimizer over the current support is tried and kept when it is
    feasible and optimal; this usually ends the run exactly.

    Iteration stops when the duality gap drops below ``gap_tol`` or the squared
    norm of the iterate drops below ``stop_below**2``.

    Returns ``(weights, sq_norm, gap, iterations)``.
    """
    n = gram.shape[0]
    diag = np.diag(gram)
    start = int(np.argmin(diag))
    a = np.zeros(n)
    a[start] = 1.0
    grad = gram[:, start].copy()
    sq = float(diag[start])
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        s = int(np.argmin(grad))
        gap = sq - float(grad[s])
        if gap <= gap_tol or sq <= stop_below * stop_below:
            break
        active = a > 0.0
        away_vals = np.where(active, grad, -np.inf)
        v = int(np.argmax(away_vals))
        away_gap = float(grad[v]) - sq
        if gap >= away_gap:
            # toward vertex s: a <- a + t (e_s - a)
            dd = float(gram[s, s]) - 2.0 * float(grad[s]) + sq
            t_max = 1.0
            t = (sq - float(grad[s])) / dd if dd > 0 else t_max
            t = min(max(t, 0.0), t_max)
            a *= 1.0 - t
            a[s] += t
            grad = (1.0 - t) * grad + t * gram[:, s]
        else:
            # away from vertex v: a <- a + t (a - e_v)
            dd = float(gram[v, v]) - 2.0 * float(grad[v]) + sq
            av = float(a[v])
            t_max = av / (1.0 - av) if av < 1.0 else math.inf
            t = (float(grad[v]) - sq) / dd if dd > 0 else t_max
            t = min(max(t, 0.0), t_max)
            a *= 1.0 + t
            a[v] -= t
            if t == t_max:
                a[v] = 0.0
            grad = (1.0 + t) * grad - t * gram[:, v]
        a[a < 0.0] = 0.0
        sq = float(a @ grad)
        if it % _POLISH_EVERY == 0:
            polished = _polish(gram, a, sq)
            if polished is not None:
                a, grad, sq = polished
                s = int(np.argmin(grad))
                gap = sq - float(grad[s])
                if gap <= gap_tol:
                    break
    polished = _polish(gram, a, sq)
    if polished is not None:
        a, grad, sq = polished
    gap = max(sq - float(np.min(grad)), 0.0)
    return a, max(sq, 0.0), gap, it


def _polish(gram, a, sq):
    """Affine min-norm point over the support of ``a`` or one of its facets.

    Returns the best feasible candidate that does not increase the objective,
    or ``None``. Trying facets lets the step land on the optimal face when
    Frank-Wolfe is zigzagging across an extra, affinely dependent vertex.
    """
    support = np.flatnonzero(a > 1e-14)
    faces = [support]
    if support.size > 1:
        faces += [np.delete(support, i) for i in range(support.size)]
    best = None
    for face in faces:
        b = _affine_min_norm(gram, face, a.size)
        if b is None:
            continue
        grad = gram @ b
        new_sq = float(b @ grad)
        if new_sq > sq + 1e-15:
            continue
        if best is None or new_sq < best[2]:
            best = (b, grad, new_sq)
    return best


def _affine_min_norm(gram, face, n):
    k = face.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = gram[np.ix_(face, face)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    w = sol[:k]
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0) or abs(w.sum() - 1.0) > 1e-9:
        return None
    b = np.zeros(n)
    b[face] = w / w.sum()
    return b


def check_feasibility(W: WitnessSet, tol: float = DEFAULT_TOL) -> FeasibilityCertificate:
    """Decide whether the witnesses fit in an open hemisphere.

    The witnesses are coherent exactly when the origin lies outside their
    Euclidean convex hull. The minimum-norm point ``p`` of the hull is found by
    Frank-Wolfe; ``p / |p|`` then has positive dot product with every witness
    and serves as the certified center. Hulls passing within ``tol`` of the
    origin are classed as contradictory.
    """
    if not (0.0 < tol <= 1e-3):
        raise ToleranceOutOfRange(f"tol must lie in (0, 1e-3], got {tol!r}")
    V = W.vectors
    gram = V @ V.T
    a, sq, gap, iters = min_norm_point(gram, gap_tol=tol * tol, stop_below=tol)
    norm = math.sqrt(sq)
    n = len(W)

    center = None
    margin = None
    if norm > tol:
        p = a @ V
        c = p / np.linalg.norm(p)
        m = float(np.min(V @ c))
        if m > 0.0:
            center, margin = c, m

    if center is not None:
        return FeasibilityCertificate(
            Status.COHERENT, center, margin, None, norm, a, iters, gap, n
        )

    pair = None
    if n > 1:
        off = gram.copy()
        np.fill_diagonal(off, np.inf)
        i, j = np.unravel_index(int(np.argmin(off)), off.shape)
        if off[i, j] < 0.0:
            pair = (int(min(i, j)), int(max(i, j)))
    return FeasibilityCertificate(Status.CONTRADICTORY, None, None, pair, norm, a, iters, gap, n)


@dataclass(frozen=True)
class AdmissibleRegion:
    """Spherical convex hull of a coherent witness set."""

    generators: WitnessSet
    certificate: FeasibilityCertificate
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.certificate.coherent:
            raise ValueError("an admissible region needs a coherent certificate")

    @property
    def center(self) -> np.ndarray:
        return self.certificate.center

    @property
    def dim(self) -> int:
        return self.generators.dim

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.generators.vectors, tol=1e-10))

    def contains(self, mu, tol: float | None = None) -> bool:
        return contains(self, mu, tol)

    def rotated(self, g: Rotation) -> "AdmissibleRegion":
        return build_region(self.generators.rotated(g), self.tol)

    def summary(self) -> dict:
        return self.certificate.to_json()


def build_region(W: WitnessSet, tol: float = DEFAULT_TOL) -> AdmissibleRegion:
    cert = check_feasibility(W, tol)
    if not cert.coherent:
        raise ContradictionError(cert)
    return AdmissibleRegion(W, cert, tol)


def _check_dim(region: AdmissibleRegion, mu: np.ndarray):
    if mu.shape[-1] != region.dim:
        raise DimensionMismatch(f"region has dimension {region.dim}, point has {mu.shape[-1]}")


def conic_weights(region: AdmissibleRegion, mu) -> tuple[np.ndarray, float]:
    """Nonnegative least-squares weights ``a`` and residual ``|V^T a - mu|``."""
    mu = np.asarray(mu, dtype=float)
    _check_dim(region, mu)
    a, resid = nnls(region.generators.vectors.T, mu)
    return a, float(resid)


def contains(region: AdmissibleRegion, mu, tol: float | None = None) -> bool:
    """True when ``mu`` is a nonnegative combination of generators up to ``tol``."""
    tol = region.tol if tol is None else tol
    _, resid = conic_weights(region, mu)
    return resid <= tol


def contains_many(region: AdmissibleRegion, points, tol: float | None = None):
    """Vectorized :func:`contains` over rows of ``points``.

    Returns ``(mask, weights)`` where ``weights[i]`` are simplex-normalized hull
    weights for accepted rows (zeros elsewhere). Two necessary conditions
    screen rows before the per-row NNLS: distance to the generators' span, and
    the certified cap ``center . mu >= min_margin`` that contains the hull.
    """
    tol = region.tol if tol is None else tol
    M = np.array(points, dtype=float, ndmin=2)
    _check_dim(region, M)
    V = region.generators.vectors
    q, _ = np.linalg.qr(V.T)
    q = q[:, : region.rank]
    resid_span = np.linalg.norm(M - (M @ q) @ q.T, axis=1)
    cand = (resid_span <= tol) & (M @ region.center >= region.certificate.min_margin - 2.0 * tol)
    mask = np.zeros(len(M), dtype=bool)
    weights = np.zeros((len(M), len(V)))
    A = V.T
    for i in np.flatnonzero(cand):
        a, resid = nnls(A, M[i])
        if resid <= tol and a.sum() > 0:
            mask[i] = True
            weights[i] = a / a.sum()
    return mask, weights


@dataclass(frozen=True)
class VolumeEstimate:
    """Monte-Carlo fraction of the sphere, with its binomial standard error."""

    value: float
    stderr: float
    n_samples: int
    exact: bool = False

    def __float__(self) -> float:
        return self.value

    @property
    def relative_error(self) -> float:
        if self.exact:
            return 0.0
        if self.value == 0.0:
            return math.inf
        return self.stderr / self.value

    @property
    def degenerate(self) -> bool:
        """Zero estimate, outside the (0, 1] range the definition promises."""
        return self.value == 0.0 and not self.exact

    def quoted(self) -> float:
        if self.relative_error > MAX_REL_ERROR:
            raise UnreliableEstimate(
                f"estimate {self.value:.3g} +- {self.stderr:.2g} exceeds "
                f"{MAX_REL_ERROR:.0%} relative error"
            )
        return self.value


def _fraction(hits: int, n: int) -> VolumeEstimate:
    p = hits / n
    return VolumeEstimate(p, math.sqrt(p * (1.0 - p) / n), n)


def ambiguity(W: WitnessSet, n_samples: int = 100_000, seed: int = 0, tol: float = DEFAULT_TOL) -> VolumeEstimate:
    """Fraction of the sphere covered by the admissible region.

    A contradictory witness set has ambiguity exactly 1. Otherwise uniform
    sphere samples are tested for membership. A single witness (or any
    lower-dimensional hull) has measure zero and yields a ``degenerate`` zero
    estimate.
    """
    if n_samples < 1000:
        raise ValueError("ambiguity needs at least 1000 samples")
    cert = check_feasibility(W, tol)
    if not cert.coherent:
        return VolumeEstimate(1.0, 0.0, n_samples, exact=True)
    region = AdmissibleRegion(W, cert, tol)
    hits = 0
    for offset in range(0, n_samples, BLOCK):
        k = min(BLOCK, n_samples - offset)
        mask, _ = contains_many(region, sample_uniform_sphere(W.dim, k, seed, offset=offset))
        hits += int(mask.sum())
    return _fraction(hits, n_samples)


def cap_fraction(d: int, h: float) -> float:
    """Exact fraction of S^{d-1} with ``mu . c >= h`` for a fixed unit ``c``."""
    if h <= -1.0:
        return 1.0
    if h >= 1.0:
        return 0.0
    upper = 0.5 * float(betainc((d - 1) / 2.0, 0.5, 1.0 - h * h))
    return upper if h >= 0.0 else 1.0 - upper


@dataclass(frozen=True)
class RegionSample:
    points: np.ndarray
    weights: np.ndarray
    uniform: bool
    proposals: int
    acceptance: float | None


def _acceptance_upper_bound(region: AdmissibleRegion, tol: float) -> float:
    if region.rank < region.dim:
        # hull lies in a proper subspace; only a slab of width tol is reachable
        return 0.0
    return cap_fraction(region.dim, region.certificate.min_margin - 2.0 * tol)


def sample_region(
    region: AdmissibleRegion,
    n: int,
    seed: int,
    *,
    frame: Rotation | None = None,
    budget: int = PROPOSAL_BUDGET,
) -> RegionSample:
    """Draw ``n`` points of the admissible region.

    Uniform sphere proposals are filtered by membership. When the acceptance
    rate is below ``MIN_ACCEPTANCE`` the sampler switches to normalized
    Dirichlet(1, ..., 1) combinations of the generators and marks the result
    non-uniform. If the analytic cap bound already caps acceptance below that
    rate, the switch happens without spending the proposal budget.

    ``frame`` rotates every proposal, so sampling ``g . region`` with
    ``frame=g`` returns ``g`` applied to the samples of ``region``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tol = region.tol
    if _acceptance_upper_bound(region, tol) >= MIN_ACCEPTANCE:
        pts: list[np.ndarray] = []
        wts: list[np.ndarray] = []
        got = 0
        used = 0
        while got < n and used < budget:
            k = min(BLOCK, budget - used)
            prop = sample_uniform_sphere(region.dim, k, seed, offset=used)
            if frame is not None:
                prop = frame.apply(prop)
            used += k
            mask, w = contains_many(region, prop, tol)
            pts.append(prop[mask])
            wts.append(w[mask])
            got += int(mask.sum())
        rate = got / used
        if got >= n:
            return RegionSample(
                np.concatenate(pts)[:n], np.concatenate(wts)[:n], True, used, rate
            )
        if rate >= MIN_ACCEPTANCE:
            raise EmptySampleBudget(f"only {got} of {n} points accepted from {used} proposals")
    w = stream(seed, 0xD1, len(region.generators)).dirichlet(np.ones(len(region.generators)), size=n)
    points = normalize_rows(w @ region.generators.vectors)
    return RegionSample(points, w, False, 0, None)


@dataclass(frozen=True)
class CapRegion:
    """Intersection of caps ``{mu : mu . axis >= cos_threshold}``; may be empty."""

    axes: np.ndarray
    cos_thresholds: np.ndarray

    @property
    def dim(self) -> int:
        return self.axes.shape[1]

    @property
    def caps(self) -> list[tuple[np.ndarray, float]]:
        return [(a, float(c)) for a, c in zip(self.axes, self.cos_thresholds)]


def cap_region_from(W: WitnessSet, theta: float = math.pi / 2) -> CapRegion:
    if not (0.0 < theta <= math.pi / 2):
        raise ValueError("cap half-angle must lie in (0, pi/2]")
    c = 0.0 if theta == math.pi / 2 else math.cos(theta)
    return CapRegion(W.vectors.copy(), np.full(len(W), c))


def cap_contains(cap: CapRegion, mu) -> bool:
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != cap.dim:
        raise DimensionMismatch(f"cap region has dimension {cap.dim}, point has {mu.shape[-1]}")
    return bool(np.all(cap.axes @ mu >= cap.cos_thresholds))


def cap_volume(cap: CapRegion, n_samples: int = 100_000, seed: int = 0) -> VolumeEstimate:
    hits = 0
    for offset in range(0, n_samples, BLOCK):
        k = min(BLOCK, n_samples - offset)
        pts = sample_uniform_sphere(cap.dim, k, seed, offset=offset)
        hits += int(np.all(pts @ cap.axes.T >= cap.cos_thresholds, axis=1).sum())
    return _fraction(hits, n_samples)
