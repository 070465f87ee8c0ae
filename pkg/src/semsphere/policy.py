"""Policy priors over the sphere and named policy regimes.

A prior maps an interpretation point ``mu`` to a preference in ``[0, 1]``.
Every prior is evaluated from ``mu`` alone: the evaluation API has no
parameter through which witnesses or admissible regions could reach it, so
policy can select within a region but never reshape one.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigParseError, DimensionMismatch
from .sphere import UNIT_TOL, sample_uniform_sphere

PRIOR_KINDS = ("IndicatorThreshold", "SmoothCap", "Product", "Constant")
EXTRACTOR_KINDS = ("LinearProjection", "CalibratedProjection")


@dataclass(frozen=True, eq=False)
class FeatureExtractor:
    """Affine readout ``scale * (mu . direction) + offset`` in feature units.

    ``CalibratedProjection`` additionally clamps the readout to ``bounds``,
    e.g. a credit score to its published range.
    """

    id: str
    direction: np.ndarray
    scale: float = 1.0
    offset: float = 0.0
    kind: str = "LinearProjection"
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in EXTRACTOR_KINDS:
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        d = np.asarray(self.direction, dtype=float)
        if d.ndim != 1 or abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise ValueError(f"extractor {self.id!r} direction must be a unit vector")
        if self.scale == 0.0:
            raise ValueError(f"extractor {self.id!r} has zero scale")
        if self.kind == "CalibratedProjection" and self.bounds is None:
            raise ValueError(f"calibrated extractor {self.id!r} needs bounds")
        object.__setattr__(self, "direction", d)

    @property
    def dim(self) -> int:
        return self.direction.shape[0]

    def __call__(self, mu) -> np.ndarray | float:
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-1] != self.dim:
            raise DimensionMismatch(f"extractor {self.id!r} has dimension {self.dim}, point has {mu.shape[-1]}")
        out = self.scale * (mu @ self.direction) + self.offset
        if self.kind == "CalibratedProjection":
            out = np.clip(out, *self.bounds)
        return out if np.ndim(out) else float(out)

    def projection_for(self, value: float) -> float:
        """Projection ``mu . direction`` that reads out as ``value``."""
        return (value - self.offset) / self.scale

    def to_json(self) -> dict:
        doc = {
            "id": self.id,
            "kind": self.kind,
            "direction": self.direction.tolist(),
            "scale": self.scale,
            "offset": self.offset,
        }
        if self.bounds is not None:
            doc["bounds"] = list(self.bounds)
        return doc


_OPS = {"<=": np.less_equal, ">=": np.greater_equal}


@dataclass(frozen=True, eq=False)
class Condition:
    extractor: FeatureExtractor
    op: str
    value: float

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported comparison {self.op!r}")

    def holds(self, M: np.ndarray) -> np.ndarray:
        return _OPS[self.op](self.extractor(M), self.value)


class PolicyPrior:
    """Base class: a pure function of ``mu`` into ``[0, 1]``."""

    kind: str = ""

    def __init__(self, id: str):
        self.id = id

    def __call__(self, mu) -> float:
        return eval_prior(self, mu)

    def evaluate_many(self, M: np.ndarray) -> np.ndarray:
        """Prior values for each row of ``M`` (shape ``(n, d)``)."""
        raise NotImplementedError

    @property
    def dim(self) -> int | None:
        return None

    @property
    def upper_bound(self) -> float:
        """Largest value the prior can take anywhere on the sphere."""
        return 1.0

    def conditions(self) -> list[Condition]:
        return []

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.id!r})"


class IndicatorThreshold(PolicyPrior):
    """1 where every feature condition holds, else 0."""

    kind = "IndicatorThreshold"

    def __init__(self, id: str, conditions: Sequence[Condition]):
        super().__init__(id)
        self._conditions = tuple(conditions)
        dims = {c.extractor.dim for c in self._conditions}
        if len(dims) > 1:
            raise DimensionMismatch(f"prior {id!r} mixes extractor dimensions {sorted(dims)}")

    @property
    def dim(self):
        return self._conditions[0].extractor.dim if self._conditions else None

    def conditions(self):
        return list(self._conditions)

    def evaluate_many(self, M):
        ok = np.ones(M.shape[0], dtype=bool)
        for c in self._conditions:
            ok &= c.holds(M)
        return ok.astype(float)


class SmoothCap(PolicyPrior):
    """von Mises-Fisher shaped preference ``exp(kappa * (mu . axis - 1))``."""

    kind = "SmoothCap"

    def __init__(self, id: str, axis, kappa: float):
        super().__init__(id)
        axis = np.asarray(axis, dtype=float)
        if axis.ndim != 1 or abs(np.linalg.norm(axis) - 1.0) > UNIT_TOL:
            raise ValueError(f"prior {id!r} axis must be a unit vector")
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        self.axis = axis
        self.kappa = float(kappa)

    @property
    def dim(self):
        return self.axis.shape[0]

    def evaluate_many(self, M):
        return np.clip(np.exp(self.kappa * (M @ self.axis - 1.0)), 0.0, 1.0)


class Product(PolicyPrior):
    kind = "Product"

    def __init__(self, id: str, children: Sequence[PolicyPrior]):
        super().__init__(id)
        self.children = tuple(children)
        dims = {c.dim for c in self.children} - {None}
        if len(dims) > 1:
            raise DimensionMismatch(f"prior {id!r} mixes child dimensions {sorted(dims)}")

    @property
    def dim(self):
        for c in self.children:
            if c.dim is not None:
                return c.dim
        return None

    @property
    def upper_bound(self):
        return math.prod(c.upper_bound for c in self.children)

    def conditions(self):
        return [cond for c in self.children for cond in c.conditions()]

    def evaluate_many(self, M):
        out = np.ones(M.shape[0])
        for c in self.children:
            out = out * c.evaluate_many(M)
        return out


class Constant(PolicyPrior):
    kind = "Constant"

    def __init__(self, id: str, value: float):
        super().__init__(id)
        if not 0.0 <= value <= 1.0:
            raise ValueError("constant prior value must lie in [0, 1]")
        self.value = float(value)

    @property
    def upper_bound(self):
        return self.value

    def evaluate_many(self, M):
        return np.full(M.shape[0], self.value)


def eval_prior(prior: PolicyPrior, mu) -> float:
    """Evaluate ``prior`` at a single point ``mu``."""
    if not isinstance(mu, (np.ndarray, list, tuple)):
        raise TypeError(f"priors are evaluated on points only, got {type(mu).__name__}")
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1:
        raise DimensionMismatch("eval_prior takes one point; use evaluate_many for batches")
    if prior.dim is not None and prior.dim != mu.shape[0]:
        raise DimensionMismatch(f"prior {prior.id!r} has dimension {prior.dim}, point has {mu.shape[0]}")
    return float(prior.evaluate_many(mu[None, :])[0])


@dataclass(frozen=True)
class PolicyRegime:
    name: str
    prior: PolicyPrior
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"regime {self.name!r}: tau must lie in [0, 1]")

    def to_json(self) -> dict:
        return {"name": self.name, "tau": self.tau, "prior": prior_to_json(self.prior)}


# -- relaxation order ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RelaxationVerdict:
    confirmed: bool
    counterexample: np.ndarray | None
    probes: np.ndarray = field(repr=False)

    @property
    def label(self) -> str:
        return "ConfirmedOnProbes" if self.confirmed else "CounterexampleFound"


def corner_probes(priors: Sequence[PolicyPrior], dim: int, eps: float = 1e-6) -> np.ndarray:
    """Points whose features sit on, just inside, and just outside every threshold.

    Thresholds are gathered per extractor from all indicator conditions; the
    Cartesian product over extractors is realized as unit vectors through the
    least-norm preimage of the projections plus a filler direction orthogonal
    to every extractor axis. Combinations that do not fit on the sphere are
    skipped.
    """
    by_extractor: dict[str, tuple[FeatureExtractor, set[float]]] = {}
    for p in priors:
        for c in p.conditions():
            ex = c.extractor
            by_extractor.setdefault(ex.id, (ex, set()))[1].add(float(c.value))
    if not by_extractor:
        return np.empty((0, dim))
    extractors = [v[0] for v in by_extractor.values()]
    levels = []
    for ex, values in by_extractor.values():
        vs = sorted(values)
        step = eps * max(1.0, max(abs(v) for v in vs))
        pts = set()
        for v in vs:
            pts.update((v - step, v, v + step))
        pts.update((a + b) / 2 for a, b in zip(vs, vs[1:]))
        levels.append(sorted(pts))

    D = np.stack([ex.direction for ex in extractors])
    pinv = np.linalg.pinv(D)
    q, _ = np.linalg.qr(np.hstack([D.T, np.eye(dim)]))
    filler = q[:, np.linalg.matrix_rank(D)]
    out = []
    for combo in itertools.product(*levels):
        proj = np.array([ex.projection_for(v) for ex, v in zip(extractors, combo)])
        v = pinv @ proj
        if not np.allclose(D @ v, proj, atol=1e-12):
            continue
        r2 = 1.0 - float(v @ v)
        if r2 < 0.0:
            continue
        out.append(v + math.sqrt(r2) * filler)
    return np.array(out).reshape(-1, dim)


def is_relaxation(
    rho1: PolicyPrior,
    rho2: PolicyPrior,
    n_probes: int = 10_000,
    seed: int = 0,
    *,
    dim: int | None = None,
    extra_probes: np.ndarray | None = None,
) -> RelaxationVerdict:
    """Probe whether ``rho1 <= rho2`` pointwise.

    Confirmation only means no probe violated the order; it is not a proof.
    """
    if n_probes < 1000:
        raise ValueError("is_relaxation needs at least 1000 probes")
    dim = dim or rho1.dim or rho2.dim
    if dim is None:
        raise ValueError("cannot infer the sphere dimension; pass dim=")
    parts = [sample_uniform_sphere(dim, n_probes, seed), corner_probes([rho1, rho2], dim)]
    if extra_probes is not None:
        parts.append(np.asarray(extra_probes, dtype=float).reshape(-1, dim))
    probes = np.concatenate(parts)
    bad = np.flatnonzero(rho2.evaluate_many(probes) < rho1.evaluate_many(probes))
    if bad.size:
        return RelaxationVerdict(False, probes[bad[0]].copy(), probes)
    return RelaxationVerdict(True, None, probes)


# -- configuration --------------------------------------------------------------


def extractor_from_json(doc: dict, path: str = "extractor") -> FeatureExtractor:
    try:
        bounds = doc.get("bounds")
        return FeatureExtractor(
            id=str(doc["id"]),
            kind=doc.get("kind", "LinearProjection"),
            direction=np.asarray(doc["direction"], dtype=float),
            scale=float(doc.get("scale", 1.0)),
            offset=float(doc.get("offset", 0.0)),
            bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])),
        )
    except KeyError as exc:
        raise ConfigParseError(f"missing key {exc.args[0]!r}", field=path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(str(exc), field=path) from None


def parse_extractor_registry(doc: dict | str) -> dict[str, FeatureExtractor]:
    if isinstance(doc, str):
        doc = _load_json(doc)
    items = doc.get("extractors", [])
    if not isinstance(items, list):
        raise ConfigParseError("'extractors' must be a list", field="extractors")
    registry = {}
    for i, item in enumerate(items):
        ex = extractor_from_json(item, f"extractors[{i}]")
        if ex.id in registry:
            raise ConfigParseError(f"duplicate extractor id {ex.id!r}", field=f"extractors[{i}].id")
        registry[ex.id] = ex
    return registry


def prior_from_json(doc, registry: dict[str, FeatureExtractor], path: str, default_id: str) -> PolicyPrior:
    if not isinstance(doc, dict):
        raise ConfigParseError("prior must be an object", field=path)
    kind = doc.get("kind")
    if kind not in PRIOR_KINDS:
        raise ConfigParseError(f"unknown prior kind {kind!r}", field=f"{path}.kind")
    pid = str(doc.get("id", default_id))
    try:
        if kind == "Constant":
            return Constant(pid, float(doc["value"]))
        if kind == "SmoothCap":
            return SmoothCap(pid, np.asarray(doc["axis"], dtype=float), float(doc["kappa"]))
        if kind == "Product":
            children = doc["children"]
            if not isinstance(children, list):
                raise ConfigParseError("children must be a list", field=f"{path}.children")
            return Product(
                pid,
                [
                    prior_from_json(c, registry, f"{path}.children[{i}]", f"{pid}/{i}")
                    for i, c in enumerate(children)
                ],
            )
        conditions = []
        for i, f in enumerate(doc["features"]):
            fpath = f"{path}.features[{i}]"
            ex_id = f.get("extractor_id")
            if ex_id not in registry:
                raise ConfigParseError(f"unknown extractor {ex_id!r}", field=f"{fpath}.extractor_id")
            if f.get("op") not in _OPS:
                raise ConfigParseError(f"op must be '<=' or '>=', got {f.get('op')!r}", field=f"{fpath}.op")
            conditions.append(Condition(registry[ex_id], f["op"], float(f["value"])))
        return IndicatorThreshold(pid, conditions)
    except ConfigParseError:
        raise
    except KeyError as exc:
        raise ConfigParseError(f"missing key {exc.args[0]!r}", field=path) from None
    except (TypeError, ValueError, DimensionMismatch) as exc:
        raise ConfigParseError(str(exc), field=path) from None


def parse_regime_config(text: str, registry: dict[str, FeatureExtractor] | None = None) -> list[PolicyRegime]:
    """Parse a JSON regime document into validated regimes.

    Extractors declared in the document's own ``extractors`` list are added to
    ``registry``. An empty document yields no regimes.
    """
    if not text.strip():
        return []
    doc = _load_json(text)
    if not isinstance(doc, dict):
        raise ConfigParseError("top level must be an object", line=1)
    reg = dict(registry or {})
    reg.update(parse_extractor_registry(doc))
    items = doc.get("regimes", [])
    if not isinstance(items, list):
        raise ConfigParseError("'regimes' must be a list", field="regimes")
    regimes = []
    names = set()
    for i, item in enumerate(items):
        path = f"regimes[{i}]"
        if not isinstance(item, dict):
            raise ConfigParseError("regime must be an object", field=path)
        name = item.get("name")
        line = _line_of(text, name)
        if not isinstance(name, str) or not name:
            raise ConfigParseError("regime needs a non-empty string name", field=f"{path}.name")
        if name in names:
            raise ConfigParseError(f"duplicate regime {name!r}", line=line, field=f"{path}.name")
        names.add(name)
        tau = item.get("tau")
        if isinstance(tau, bool) or not isinstance(tau, (int, float)) or not 0.0 <= tau <= 1.0:
            raise ConfigParseError(f"tau must be a number in [0, 1], got {tau!r}", line=line, field=f"{path}.tau")
        try:
            prior = prior_from_json(item.get("prior"), reg, f"{path}.prior", name)
        except ConfigParseError as exc:
            if exc.line is None and line is not None:
                raise ConfigParseError(str(exc).split("] ", 1)[-1], line=line, field=exc.field) from None
            raise
        regimes.append(PolicyRegime(name, prior, float(tau)))
    return regimes


def prior_to_json(prior: PolicyPrior) -> dict:
    doc: dict = {"kind": prior.kind, "id": prior.id}
    if isinstance(prior, Constant):
        doc["value"] = prior.value
    elif isinstance(prior, SmoothCap):
        doc["axis"] = prior.axis.tolist()
        doc["kappa"] = prior.kappa
    elif isinstance(prior, Product):
        doc["children"] = [prior_to_json(c) for c in prior.children]
    elif isinstance(prior, IndicatorThreshold):
        doc["features"] = [
            {"extractor_id": c.extractor.id, "op": c.op, "value": c.value} for c in prior.conditions()
        ]
    return doc


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, line=exc.lineno) from None


def _line_of(text: str, name) -> int | None:
    if not isinstance(name, str):
        return None
    idx = text.find(json.dumps(name))
    return None if idx < 0 else text.count("\n", 0, idx) + 1
