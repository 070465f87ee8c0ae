"""Synthetic mortgage-underwriting harness built on the semsphere core."""

from .benchmark import (
    AuditRecord,
    AuditWriter,
    BenchmarkReport,
    ReplayResult,
    decide,
    read_audit,
    run_benchmark,
    verify_audit,
    write_audit,
)
from .encoding import DIM, default_registry, default_regimes, extract_witnesses
from .loans import CSV_COLUMNS, LoanRecord, generate_dataset, read_loans, write_loans

__all__ = [
    "AuditRecord",
    "AuditWriter",
    "BenchmarkReport",
    "CSV_COLUMNS",
    "DIM",
    "LoanRecord",
    "ReplayResult",
    "decide",
    "default_regimes",
    "default_registry",
    "extract_witnesses",
    "generate_dataset",
    "read_audit",
    "read_loans",
    "run_benchmark",
    "verify_audit",
    "write_audit",
    "write_loans",
]
