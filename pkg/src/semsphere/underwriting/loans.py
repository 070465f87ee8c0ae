"""Loan records, the synthetic generator, and CSV input/output.

CSV schema, version 1::

    loan_id,ltv,fico,dti,property_type,occupancy,purpose,defect

Floats use a dot decimal and are written with ``repr`` so they round trip
exactly; ``defect`` is ``0`` or ``1``. Unknown columns are ignored with a
warning.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..sphere import stream
from .encoding import CATEGORIES

log = logging.getLogger(__name__)

CSV_COLUMNS = ("loan_id", "ltv", "fico", "dti", "property_type", "occupancy", "purpose", "defect")
SCHEMA_VERSION = 1

# Marginal weights for categorical fields, in CATEGORIES order.
_CATEGORY_WEIGHTS = {
    "property_type": (0.62, 0.14, 0.16, 0.03, 0.05),
    "occupancy": (0.86, 0.04, 0.10),
    "purpose": (0.52, 0.28, 0.20),
}

# Clean loans are drawn from these bands. The gaps (0.895, 0.975) for LTV
# and (615, 665) for FICO keep clean loans out of the band that RELAXED
# approves but STANDARD does not, so the STANDARD -> RELAXED step adds no
# approvals. ``relaxed_band=True`` removes the gaps.
_CLEAN_LTV = ((0.40, 0.80, 0.55), (0.80, 0.895, 0.30), (0.975, 1.0, 0.15))
_CLEAN_FICO = ((700, 850, 0.62), (665, 699, 0.26), (560, 615, 0.12))
_BAND_LTV = ((0.40, 1.0, 1.0),)
_BAND_FICO = ((560, 850, 1.0),)

DEFECT_KINDS = ("equity_conflict", "low_credit", "over_leveraged")


@dataclass(frozen=True)
class LoanRecord:
    loan_id: str
    ltv: float
    fico: int
    dti: float
    property_type: str
    occupancy: str
    purpose: str
    defect: bool = False

    def __post_init__(self):
        if not self.loan_id:
            raise ValueError("loan_id must be non-empty")
        if not 0.0 < self.ltv <= 1.5:
            raise ValueError(f"{self.loan_id}: ltv {self.ltv!r} outside (0, 1.5]")
        if isinstance(self.fico, bool) or int(self.fico) != self.fico or not 300 <= self.fico <= 850:
            raise ValueError(f"{self.loan_id}: fico {self.fico!r} must be an integer in [300, 850]")
        if not 0.0 < self.dti <= 1.0:
            raise ValueError(f"{self.loan_id}: dti {self.dti!r} outside (0, 1]")
        object.__setattr__(self, "fico", int(self.fico))


def _banded(rng: np.random.Generator, bands) -> float:
    weights = np.array([b[2] for b in bands])
    lo, hi, _ = bands[rng.choice(len(bands), p=weights / weights.sum())]
    return float(rng.uniform(lo, hi))


def _category(rng: np.random.Generator, field: str) -> str:
    values = CATEGORIES[field]
    w = np.array(_CATEGORY_WEIGHTS[field])
    return values[rng.choice(len(values), p=w / w.sum())]


def _clean(rng, loan_id: str, relaxed_band: bool) -> LoanRecord:
    ltv = round(_banded(rng, _BAND_LTV if relaxed_band else _CLEAN_LTV), 4)
    fico = int(_banded(rng, _BAND_FICO if relaxed_band else _CLEAN_FICO))
    return LoanRecord(
        loan_id,
        ltv,
        fico,
        round(float(rng.uniform(0.10, 0.50)), 4),
        _category(rng, "property_type"),
        _category(rng, "occupancy"),
        _category(rng, "purpose"),
        False,
    )


def _defect(rng, loan_id: str) -> LoanRecord:
    """A loan no regime can approve.

    * equity_conflict: cash-out refinance with LTV above 1 (contradictory)
    * low_credit: FICO at most 600, below every regime's floor
    * over_leveraged: LTV above 1.02, above every regime's ceiling
    """
    kind = DEFECT_KINDS[int(rng.integers(len(DEFECT_KINDS)))]
    dti = round(float(rng.uniform(0.20, 0.65)), 4)
    ptype, occ = _category(rng, "property_type"), _category(rng, "occupancy")
    if kind == "equity_conflict":
        ltv, fico, purpose = float(rng.uniform(1.02, 1.5)), int(rng.integers(620, 851)), "cash_out_refi"
    elif kind == "low_credit":
        ltv, fico, purpose = float(rng.uniform(0.40, 0.95)), int(rng.integers(400, 601)), _category(rng, "purpose")
    else:
        ltv, fico = float(rng.uniform(1.02, 1.5)), int(rng.integers(620, 851))
        purpose = ("purchase", "no_cash_out_refi")[int(rng.integers(2))]
    return LoanRecord(loan_id, round(ltv, 4), fico, dti, ptype, occ, purpose, True)


def generate_dataset(n: int, defect_rate: float, seed: int, *, relaxed_band: bool = False) -> list[LoanRecord]:
    """``n`` synthetic loans; each is a planted defect with probability ``defect_rate``.

    Loan ``i`` depends only on ``(seed, i)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= defect_rate <= 0.5:
        raise ValueError("defect_rate must lie in [0, 0.5]")
    out = []
    for i in range(n):
        rng = stream(seed, 0x10A2, i)
        loan_id = f"L{i:07d}"
        if rng.random() < defect_rate:
            out.append(_defect(rng, loan_id))
        else:
            out.append(_clean(rng, loan_id, relaxed_band))
    return out


def write_loans(loans, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for ln in loans:
            w.writerow(
                [ln.loan_id, repr(ln.ltv), ln.fico, repr(ln.dti), ln.property_type, ln.occupancy, ln.purpose, int(ln.defect)]
            )


def _parse_row(row: dict, lineno: int) -> LoanRecord:
    try:
        defect = row["defect"].strip()
        if defect not in ("0", "1"):
            raise ValueError(f"defect must be 0 or 1, got {defect!r}")
        return LoanRecord(
            row["loan_id"].strip(),
            float(row["ltv"]),
            int(row["fico"]),
            float(row["dti"]),
            row["property_type"].strip(),
            row["occupancy"].strip(),
            row["purpose"].strip(),
            defect == "1",
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ValueError(f"line {lineno}: {exc}") from None


def read_loans(path) -> list[LoanRecord]:
    """Parse a loan CSV. Raises ``ValueError`` naming the line on bad input."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"loan CSV is missing columns: {', '.join(missing)}")
        extra = [c for c in header if c not in CSV_COLUMNS]
        if extra:
            log.warning("ignoring unknown loan CSV columns: %s", ", ".join(extra))
        return [_parse_row(row, reader.line_num) for row in reader]
