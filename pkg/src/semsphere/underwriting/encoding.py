"""Analytic witness encoder for loan records.

Layout of the ``DIM = 21`` dimensional embedding space:

* axes 0-2: feature axes read by the ``ltv``, ``fico`` and ``dti`` extractors
* axes 3-6: nuisance subspace holding each loan's leftover norm
* axes 7-20: tag dictionary, one direction per fact kind or categorical value

A loan's *profile* ``p`` puts on every feature axis the projection that the
registered extractor reads back as the loan's value, and fills the rest of
the unit norm along a loan-specific nuisance direction. Each fact witness is
``normalize(p + s * t_f)`` where ``t_f`` is the fact's dictionary direction
minus the mean over the loan's facts. The ``t_f`` sum to zero, so the
barycenter of the witnesses points exactly at ``p`` and the certificate
center reads out the loan's values.
"""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources

import numpy as np

from ..admissibility import WitnessSet
from ..errors import MissingExtractor
from ..policy import FeatureExtractor, PolicyRegime, parse_extractor_registry, parse_regime_config
from ..sphere import normalize

DIM = 21
NUMERIC_FIELDS = ("ltv", "fico", "dti")
NUISANCE_AXES = tuple(range(3, 7))
CATEGORIES = {
    "property_type": ("single_family", "condo", "pud", "manufactured", "multi_unit"),
    "occupancy": ("primary", "second_home", "investment"),
    "purpose": ("purchase", "no_cash_out_refi", "cash_out_refi"),
}
TAGS = NUMERIC_FIELDS + tuple(f"{k}={v}" for k, vals in CATEGORIES.items() for v in vals)
TAG_AXES = {tag: 7 + i for i, tag in enumerate(TAGS)}

# Angular spread of a witness around the profile: |s * t_f| on the tangent side.
TAG_SPREAD = 0.05

# LTV above this with a cash-out refinance is treated as contradictory evidence.
NEGATIVE_EQUITY_LTV = 1.0
CONTRADICTION_LABEL = "equity_conflict"

DEFAULT_CONFIG = "default_regimes.json"


def default_config_text() -> str:
    return resources.files("semsphere.data").joinpath(DEFAULT_CONFIG).read_text()


def default_registry() -> dict[str, FeatureExtractor]:
    return parse_extractor_registry(json.loads(default_config_text()))


def default_regimes() -> list[PolicyRegime]:
    return parse_regime_config(default_config_text())


def nuisance_direction(loan_id: str, exclude: np.ndarray) -> np.ndarray:
    """Unit vector in the nuisance subspace keyed by ``loan_id``, made
    orthogonal to the rows of ``exclude``."""
    digest = hashlib.blake2b(loan_id.encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = np.zeros(DIM)
    v[list(NUISANCE_AXES)] = rng.standard_normal(len(NUISANCE_AXES))
    q, _ = np.linalg.qr(exclude.T)
    v -= q @ (q.T @ v)
    return normalize(v)


def profile(loan, registry: dict[str, FeatureExtractor]) -> np.ndarray:
    """Unit vector whose extractor readouts equal the loan's numeric fields."""
    missing = [f for f in NUMERIC_FIELDS if f not in registry]
    if missing:
        raise MissingExtractor(f"no extractor registered for {', '.join(missing)}")
    D = np.stack([registry[f].direction for f in NUMERIC_FIELDS])
    if D.shape[1] != DIM:
        raise MissingExtractor(f"extractors have dimension {D.shape[1]}, the encoder needs {DIM}")
    proj = np.array([registry[f].projection_for(getattr(loan, f)) for f in NUMERIC_FIELDS])
    v = np.linalg.pinv(D) @ proj
    r2 = 1.0 - float(v @ v)
    if r2 <= 0.0:
        raise ValueError(f"loan {loan.loan_id!r} lies outside the encodable range")
    return v + math.sqrt(r2) * nuisance_direction(loan.loan_id, D)


def fact_tags(loan) -> list[str]:
    tags = list(NUMERIC_FIELDS)
    for field, values in CATEGORIES.items():
        value = getattr(loan, field)
        if value not in values:
            raise MissingExtractor(f"no dictionary direction for {field}={value!r}")
        tags.append(f"{field}={value}")
    return tags


def has_equity_conflict(loan) -> bool:
    return loan.ltv > NEGATIVE_EQUITY_LTV and loan.purpose == "cash_out_refi"


def extract_witnesses(loan, registry: dict[str, FeatureExtractor] | None = None) -> WitnessSet:
    """One witness per fact of ``loan``.

    A cash-out refinance on a loan with LTV above 1 has no equity to cash
    out; that conflict is encoded as an extra witness antipodal to the
    purpose witness, which makes the set contradictory.
    """
    registry = default_registry() if registry is None else registry
    p = profile(loan, registry)
    tags = fact_tags(loan)
    E = np.zeros((len(tags), DIM))
    E[np.arange(len(tags)), [TAG_AXES[t] for t in tags]] = 1.0
    T = E - E.mean(axis=0)
    s = TAG_SPREAD / math.sqrt(1.0 - 1.0 / len(tags))
    vectors = [normalize(p + s * t) for t in T]
    labels = [f"{t}:{getattr(loan, t)!r}" if t in NUMERIC_FIELDS else t for t in tags]
    if has_equity_conflict(loan):
        vectors.append(-vectors[-1])
        labels.append(CONTRADICTION_LABEL)
    return WitnessSet(np.array(vectors), labels)
