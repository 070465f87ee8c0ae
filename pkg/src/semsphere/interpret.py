"""Constrained interpretation: the policy argmax over the admissible region.

Refusal is an ordinary return value. It happens when the witnesses
contradict each other, when no admissible point reaches the regime's
threshold, or when a generated text fails its round-trip check.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .admissibility import (
    DEFAULT_TOL,
    AdmissibleRegion,
    FeasibilityCertificate,
    WitnessSet,
    check_feasibility,
    contains,
    sample_region,
)
from .policy import PolicyPrior, PolicyRegime, eval_prior
from .sphere import Rotation, geodesic_distance, normalize_rows

DEFAULT_DELTA = 1e-6


class RefusalReason(str, enum.Enum):
    CONTRADICTION = "Contradiction"
    POLICY_EXCLUSION = "PolicyExclusion"
    VERIFICATION_FAILURE = "VerificationFailure"


_MESSAGES = {
    RefusalReason.CONTRADICTION: "Evidence contradicts",
    RefusalReason.POLICY_EXCLUSION: "No policy-compliant interpretation",
    RefusalReason.VERIFICATION_FAILURE: "Verification failed",
}


@dataclass(frozen=True)
class InterpretOptions:
    """Search settings. ``restarts`` starts are refined out of
    ``restarts * samples_per_restart`` region samples plus the generators and
    the certified center."""

    restarts: int = 8
    samples_per_restart: int = 16
    seed: int = 0
    tol: float = DEFAULT_TOL
    min_step: float = 1e-6
    max_sweeps: int = 200
    frame: Rotation | None = None

    def __post_init__(self):
        if self.restarts < 8:
            raise ValueError("at least 8 restarts are required")
        if self.samples_per_restart < 1:
            raise ValueError("samples_per_restart must be >= 1")


@dataclass(frozen=True)
class OptimizerTrace:
    iterations: int
    final_gap: float
    restarts: int

    def to_json(self) -> dict:
        return {"iterations": self.iterations, "final_gap": self.final_gap, "restarts": self.restarts}


@dataclass(frozen=True, eq=False)
class Interpretation:
    mu_star: np.ndarray
    prior_value: float
    trace: OptimizerTrace
    weights: np.ndarray = field(repr=False)
    objective: float | None = None

    approved = True


@dataclass(frozen=True, eq=False)
class Refusal:
    reason: RefusalReason
    evidence: object = None
    trace: OptimizerTrace | None = None

    approved = False

    @property
    def message(self) -> str:
        return _MESSAGES[self.reason]


Outcome = Interpretation | Refusal


# -- search -------------------------------------------------------------------


@dataclass
class _Best:
    weights: np.ndarray
    point: np.ndarray
    value: float
    sweeps: int = 0
    step: float = 0.0


def _candidates(region: AdmissibleRegion, opts: InterpretOptions):
    """Start points in a fixed order: center, generators, region samples."""
    V = region.generators.vectors
    n = len(V)
    sample = sample_region(region, opts.restarts * opts.samples_per_restart, opts.seed, frame=opts.frame)
    weights = np.vstack([region.certificate.weights[None, :], np.eye(n), sample.weights])
    points = np.vstack([region.center[None, :], V, sample.points])
    return weights, points


def _refine(V, start: _Best, objective, ceiling, opts: InterpretOptions) -> _Best:
    """Coordinate ascent on hull weights via pairwise mass transfers.

    Each sweep evaluates every transfer of ``min(step, a_j)`` from coordinate j
    to coordinate i and keeps the first best one if it strictly improves;
    otherwise the step halves. Weights stay on the simplex throughout.
    """
    n = V.shape[0]
    a, point, val = start.weights.copy(), start.point, start.value
    step = 0.5
    sweeps = 0
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    if not pairs:
        return _Best(a, point, val, 0, 0.0)
    src = np.array([j for _, j in pairs])
    dst = np.array([i for i, _ in pairs])
    rows = np.arange(len(pairs))
    while step >= opts.min_step and sweeps < opts.max_sweeps:
        if ceiling is not None and val >= ceiling:
            break
        sweeps += 1
        delta = np.minimum(step, a[src])
        live = delta > 0.0
        if not np.any(live):
            step /= 2.0
            continue
        C = np.repeat(a[None, :], len(pairs), axis=0)
        C[rows, src] -= delta
        C[rows, dst] += delta
        C = C[live]
        C[C < 0.0] = 0.0
        P = normalize_rows(C @ V)
        vals = objective(P)
        k = int(np.argmax(vals))
        if vals[k] > val:
            a, point, val = C[k], P[k], float(vals[k])
        else:
            step /= 2.0
    return _Best(a, point, val, sweeps, step)


def search(region: AdmissibleRegion, objective, opts: InterpretOptions, ceiling: float | None = None) -> tuple[_Best, OptimizerTrace]:
    """Maximize ``objective`` (a batch function of points) over the region.

    Ties go to the earliest candidate in the fixed start order, which keeps the
    result deterministic and makes it follow rotations of the inputs.
    """
    V = region.generators.vectors
    weights, points = _candidates(region, opts)
    values = np.asarray(objective(points), dtype=float)
    if ceiling is not None:
        hit = np.flatnonzero(values >= ceiling)
        if hit.size:
            k = int(hit[0])
            best = _Best(weights[k], points[k], float(values[k]))
            return best, OptimizerTrace(0, 0.0, 0)
    order = np.argsort(-values, kind="stable")[: opts.restarts]
    best = None
    total = 0
    refined = 0
    for k in order:
        if not np.isfinite(values[k]) and best is not None:
            continue
        r = _refine(V, _Best(weights[k], points[k], float(values[k])), objective, ceiling, opts)
        refined += 1
        total += r.sweeps
        if best is None or r.value > best.value:
            best = r
        if ceiling is not None and best.value >= ceiling:
            break
    return best, OptimizerTrace(total, best.step, refined)


def _check_admissible(region: AdmissibleRegion, mu: np.ndarray):
    # no-hallucination invariant: the selected point must lie in the hull
    if not contains(region, mu, region.tol):
        raise AssertionError("selected interpretation left the admissible region")


# -- public API ---------------------------------------------------------------


def interpret_region(region: AdmissibleRegion, regime: PolicyRegime, opts: InterpretOptions | None = None) -> Outcome:
    opts = opts or InterpretOptions()
    prior = regime.prior
    best, trace = search(region, prior.evaluate_many, opts, ceiling=prior.upper_bound)
    _check_admissible(region, best.point)
    value = eval_prior(prior, best.point)
    if value >= regime.tau:
        return Interpretation(best.point, value, trace, best.weights)
    return Refusal(RefusalReason.POLICY_EXCLUSION, (best.point, value), trace)


def interpret(W: WitnessSet, regime: PolicyRegime, opts: InterpretOptions | None = None) -> Outcome:
    """Select the prior-maximizing admissible point, or refuse."""
    opts = opts or InterpretOptions()
    cert = check_feasibility(W, opts.tol)
    if not cert.coherent:
        return Refusal(RefusalReason.CONTRADICTION, cert)
    return interpret_region(AdmissibleRegion(W, cert, opts.tol), regime, opts)


def map_interpret(
    W: WitnessSet,
    log_likelihood: Callable[[np.ndarray], float],
    prior: PolicyPrior,
    tau: float,
    opts: InterpretOptions | None = None,
) -> Outcome:
    """Maximize ``log_likelihood(mu) + log prior(mu)`` over the region.

    Points where the prior is zero are discarded rather than scored as
    ``-inf``; if every candidate is discarded the result is a policy refusal.
    """
    opts = opts or InterpretOptions()
    cert = check_feasibility(W, opts.tol)
    if not cert.coherent:
        return Refusal(RefusalReason.CONTRADICTION, cert)
    region = AdmissibleRegion(W, cert, opts.tol)

    def objective(P):
        rho = prior.evaluate_many(P)
        out = np.full(len(P), -np.inf)
        ok = rho > 0.0
        if np.any(ok):
            ll = np.array([log_likelihood(p) for p in P[ok]], dtype=float)
            out[ok] = ll + np.log(rho[ok])
        return out

    best, trace = search(region, objective, opts)
    if not np.isfinite(best.value):
        return Refusal(RefusalReason.POLICY_EXCLUSION, (best.point, 0.0), trace)
    _check_admissible(region, best.point)
    value = eval_prior(prior, best.point)
    if value >= tau:
        return Interpretation(best.point, value, trace, best.weights, objective=best.value)
    return Refusal(RefusalReason.POLICY_EXCLUSION, (best.point, value), trace)


# -- generation -----------------------------------------------------------------


class Verbalizer(Protocol):
    def verbalize(self, mu: np.ndarray) -> str: ...


class Encoder(Protocol):
    def encode(self, text: str) -> np.ndarray: ...


class TemplateVerbalizer:
    """Writes the point's exact coordinates into a short sentence."""

    prefix = "Interpretation at coordinates "

    def verbalize(self, mu: np.ndarray) -> str:
        return self.prefix + json.dumps([float.hex(float(x)) for x in mu]) + "."


class TemplateEncoder:
    """Inverse of :class:`TemplateVerbalizer`; round trips are lossless."""

    def encode(self, text: str) -> np.ndarray:
        start = text.index("[")
        end = text.rindex("]") + 1
        return np.array([float.fromhex(x) for x in json.loads(text[start:end])])


@dataclass(frozen=True)
class Generation:
    text: str
    interpretation: Interpretation
    round_trip: float


def generate(
    query,
    regime: PolicyRegime,
    verbalizer: Verbalizer | None = None,
    encoder: Encoder | None = None,
    delta: float = DEFAULT_DELTA,
    opts: InterpretOptions | None = None,
    extract: Callable[[object], WitnessSet] | None = None,
) -> Generation | Refusal:
    """Admissibility first, text second.

    1. extract witnesses (``extract(query)``, or ``query`` is already a set)
    2. refuse on contradiction
    3. build the region and take the policy argmax
    4. refuse if the prior value is below the regime threshold
    5. verbalize and refuse unless the encoded text lands within ``delta``
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    verbalizer = verbalizer or TemplateVerbalizer()
    encoder = encoder or TemplateEncoder()
    opts = opts or InterpretOptions()
    W = extract(query) if extract is not None else query
    cert: FeasibilityCertificate = check_feasibility(W, opts.tol)
    if not cert.coherent:
        return Refusal(RefusalReason.CONTRADICTION, cert)
    region = AdmissibleRegion(W, cert, opts.tol)
    outcome = interpret_region(region, regime, opts)
    if isinstance(outcome, Refusal):
        return outcome
    text = verbalizer.verbalize(outcome.mu_star)
    dist = geodesic_distance(encoder.encode(text), outcome.mu_star)
    if not dist < delta:
        return Refusal(RefusalReason.VERIFICATION_FAILURE, dist, outcome.trace)
    return Generation(text, outcome, dist)


# -- serialization ----------------------------------------------------------------


def outcome_to_json(outcome: Outcome) -> dict:
    if isinstance(outcome, Interpretation):
        return {
            "outcome": "approve",
            "mu_star": outcome.mu_star.tolist(),
            "prior_value": outcome.prior_value,
            "optimizer_trace": outcome.trace.to_json(),
        }
    ev = outcome.evidence
    if isinstance(ev, FeasibilityCertificate):
        evidence = ev.to_json()
    elif isinstance(ev, tuple):
        evidence = {"best_mu": np.asarray(ev[0]).tolist(), "best_prior_value": float(ev[1])}
    elif isinstance(ev, float):
        evidence = {"round_trip_distance": ev}
    else:
        evidence = None
    return {
        "outcome": "refuse",
        "refusal_reason": outcome.reason.value,
        "refusal_message": outcome.message,
        "refusal_evidence": evidence,
        "optimizer_trace": None if outcome.trace is None else outcome.trace.to_json(),
    }
