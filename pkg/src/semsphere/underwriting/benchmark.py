"""Regime sweep over a loan dataset, with a replayable audit trail.

Every (loan, regime) decision produces one :class:`AuditRecord` with four
parts: the witnesses, the region certificate (or the contradiction evidence),
the policy, and the outcome. Witness vectors are stored in full so a record
can be re-decided from its own contents.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ..admissibility import AdmissibleRegion, WitnessSet, check_feasibility
from ..interpret import (
    InterpretOptions,
    Outcome,
    Refusal,
    RefusalReason,
    interpret_region,
    outcome_to_json,
)
from ..policy import PolicyRegime, prior_to_json
from .encoding import extract_witnesses
from .loans import LoanRecord

AUDIT_VERSION = 1


def loan_seed(base_seed: int, loan_id: str) -> int:
    """Per-loan search seed; independent of the loan's position in the dataset."""
    digest = hashlib.blake2b(f"{base_seed}:{loan_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def decide(W: WitnessSet, regimes: Sequence[PolicyRegime], opts: InterpretOptions):
    """Decide one witness set under each regime; the region is built once."""
    cert = check_feasibility(W, opts.tol)
    if not cert.coherent:
        return cert, [Refusal(RefusalReason.CONTRADICTION, cert) for _ in regimes]
    region = AdmissibleRegion(W, cert, opts.tol)
    return cert, [interpret_region(region, r, opts) for r in regimes]


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class AuditRecord:
    loan_id: str
    witnesses: dict
    region: dict
    policy: dict
    outcome: dict
    options: dict

    def to_json(self) -> dict:
        return {
            "version": AUDIT_VERSION,
            "loan_id": self.loan_id,
            "witnesses": self.witnesses,
            "region": self.region,
            "policy": self.policy,
            "outcome": self.outcome,
            "options": self.options,
        }

    def dumps(self) -> str:
        return _dumps(self.to_json())

    @classmethod
    def from_json(cls, doc: dict) -> "AuditRecord":
        if doc.get("version") != AUDIT_VERSION:
            raise ValueError(f"unsupported audit record version {doc.get('version')!r}")
        return cls(doc["loan_id"], doc["witnesses"], doc["region"], doc["policy"], doc["outcome"], doc["options"])

    def witness_set(self) -> WitnessSet:
        return WitnessSet(np.array(self.witnesses["vectors"], dtype=float))

    def interpret_options(self) -> InterpretOptions:
        return InterpretOptions(**self.options)


def _options_json(opts: InterpretOptions) -> dict:
    if opts.frame is not None:
        raise ValueError("audited runs do not support a proposal frame")
    return {
        "restarts": opts.restarts,
        "samples_per_restart": opts.samples_per_restart,
        "seed": opts.seed,
        "tol": opts.tol,
        "min_step": opts.min_step,
        "max_sweeps": opts.max_sweeps,
    }


def make_record(loan_id: str, W: WitnessSet, cert, regime: PolicyRegime, outcome: Outcome, opts) -> AuditRecord:
    return AuditRecord(
        loan_id=loan_id,
        witnesses={"count": len(W), "labels": W.labels, "vectors": W.vectors.tolist()},
        region=cert.to_json(),
        policy={"regime": regime.name, "policy_id": regime.prior.id, "tau": regime.tau, "prior": prior_to_json(regime.prior)},
        outcome=outcome_to_json(outcome),
        options=_options_json(opts),
    )


@dataclass(frozen=True)
class RegimeRow:
    name: str
    approved: int
    rejected: int
    har: float
    defect_rejection_rate: float

    def to_json(self) -> dict:
        return {
            "regime": self.name,
            "approved": self.approved,
            "rejected": self.rejected,
            "HAR": self.har,
            "defect_rejection_rate": self.defect_rejection_rate,
        }


@dataclass(frozen=True)
class BenchmarkReport:
    rows: list[RegimeRow]
    monotonicity_verdict: bool
    approval_set_diffs: list[dict]
    n_loans: int
    n_defects: int
    approved_ids: dict[str, list[str]] = field(repr=False, default_factory=dict)

    def row(self, name: str) -> RegimeRow:
        return next(r for r in self.rows if r.name == name)

    def to_json(self) -> dict:
        return {
            "n_loans": self.n_loans,
            "n_defects": self.n_defects,
            "regimes": [r.to_json() for r in self.rows],
            "monotonicity_verdict": self.monotonicity_verdict,
            "approval_set_diffs": self.approval_set_diffs,
        }


def summarize(loans: Sequence[LoanRecord], regimes: Sequence[PolicyRegime], approvals: dict[str, set[str]]) -> BenchmarkReport:
    """Aggregate per-regime approval sets; the result ignores loan order."""
    defects = {ln.loan_id for ln in loans if ln.defect}
    rows = []
    for r in regimes:
        ok = approvals[r.name]
        hallucinated = len(ok & defects)
        har = 100.0 * hallucinated / len(defects) if defects else 0.0
        drr = 100.0 * (len(defects) - hallucinated) / len(defects) if defects else 100.0
        rows.append(RegimeRow(r.name, len(ok), len(loans) - len(ok), har, drr))
    diffs = []
    monotone = True
    for a, b in zip(regimes, regimes[1:]):
        lost = approvals[a.name] - approvals[b.name]
        monotone &= not lost
        diffs.append(
            {
                "from": a.name,
                "to": b.name,
                "added": len(approvals[b.name] - approvals[a.name]),
                "violations": len(lost),
            }
        )
    return BenchmarkReport(
        rows, monotone, diffs, len(loans), len(defects), {k: sorted(v) for k, v in approvals.items()}
    )


def run_benchmark(
    loans: Iterable[LoanRecord],
    regimes: Sequence[PolicyRegime],
    opts: InterpretOptions | None = None,
    registry=None,
    *,
    seed: int = 0,
    sink=None,
) -> tuple[BenchmarkReport, list[AuditRecord]]:
    """Decide every loan under every regime.

    ``regimes`` should run from strictest to most relaxed. Records are passed
    to ``sink`` (a callable) as they are produced, and also returned unless a
    sink is given.
    """
    if not regimes:
        raise ValueError("at least one regime is required")
    opts = opts or InterpretOptions()
    loans = list(loans)
    approvals: dict[str, set[str]] = {r.name: set() for r in regimes}
    records: list[AuditRecord] = []
    emit = sink if sink is not None else records.append
    for loan in loans:
        W = extract_witnesses(loan, registry)
        loan_opts = replace(opts, seed=loan_seed(seed, loan.loan_id))
        cert, outcomes = decide(W, regimes, loan_opts)
        for regime, outcome in zip(regimes, outcomes):
            if outcome.approved:
                approvals[regime.name].add(loan.loan_id)
            emit(make_record(loan.loan_id, W, cert, regime, outcome, loan_opts))
    return summarize(loans, regimes, approvals), records


# -- replay -----------------------------------------------------------------------


@dataclass(frozen=True)
class ReplayResult:
    total: int
    reproduced: int
    mismatches: list[int]

    @property
    def ok(self) -> bool:
        return self.total == self.reproduced

    def message(self) -> str:
        return f"verified: {self.reproduced}/{self.total} records reproduced"


def replay(record: AuditRecord, regimes: dict[str, PolicyRegime]) -> bool:
    """Re-decide ``record`` from its stored witnesses and the named regime."""
    regime = regimes.get(record.policy["regime"])
    if regime is None:
        raise KeyError(f"regime {record.policy['regime']!r} not found in the regime config")
    if _dumps(prior_to_json(regime.prior)) != _dumps(record.policy["prior"]) or regime.tau != record.policy["tau"]:
        return False
    W = record.witness_set()
    _, (outcome,) = decide(W, [regime], record.interpret_options())
    return _dumps(outcome_to_json(outcome)) == _dumps(record.outcome)


def write_audit(records: Iterable[AuditRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.dumps() + "\n")


class AuditWriter:
    """Append-only JSONL sink; each record is written and flushed as one line."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def __call__(self, record: AuditRecord) -> None:
        self._fh.write(record.dumps() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_audit(path) -> Iterable[AuditRecord]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield AuditRecord.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"audit line {lineno}: {exc}") from None


def verify_audit(records: Iterable[AuditRecord], regimes: Sequence[PolicyRegime], limit: int | None = None) -> ReplayResult:
    by_name = {r.name: r for r in regimes}
    total = reproduced = 0
    mismatches = []
    for i, rec in enumerate(records):
        if limit is not None and i >= limit:
            break
        total += 1
        if replay(rec, by_name):
            reproduced += 1
        else:
            mismatches.append(i)
    return ReplayResult(total, reproduced, mismatches)
