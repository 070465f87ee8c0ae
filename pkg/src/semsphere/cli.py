"""Command-line entry point: ``semsphere <subcommand>``.

Refusals are normal outcomes and exit 0; malformed input exits 2 with a
diagnostic on stderr, and a failed audit replay exits 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import SemsphereError
from .interpret import InterpretOptions, outcome_to_json
from .policy import parse_regime_config
from .underwriting.benchmark import AuditWriter, decide, loan_seed, read_audit, run_benchmark, verify_audit
from .underwriting.encoding import default_config_text, extract_witnesses
from .underwriting.loans import generate_dataset, read_loans, write_loans
from .witness_info import capacity_experiment, scaling_constants, write_capacity_csv


class InputError(Exception):
    pass


def _regimes(path: str | None):
    text = default_config_text() if path is None else Path(path).read_text()
    regimes = parse_regime_config(text)
    if not regimes:
        raise InputError("regime config defines no regimes")
    return regimes


def cmd_generate(args) -> int:
    loans = generate_dataset(args.n, args.defect_rate, args.seed, relaxed_band=args.relaxed_band)
    write_loans(loans, args.out)
    print(f"wrote {len(loans)} loans ({sum(ln.defect for ln in loans)} defects) to {args.out}")
    return 0


def cmd_decide(args) -> int:
    loans = read_loans(args.loan)
    if not loans:
        raise InputError(f"{args.loan} contains no loans")
    regimes = _regimes(args.regimes)
    names = [r.name for r in regimes]
    if args.regime not in names:
        raise InputError(f"regime {args.regime!r} not in config (have {', '.join(names)})")
    regime = regimes[names.index(args.regime)]
    results = []
    for loan in loans:
        opts = InterpretOptions(restarts=args.restarts, seed=loan_seed(args.seed, loan.loan_id))
        _, (outcome,) = decide(extract_witnesses(loan), [regime], opts)
        results.append({"loan_id": loan.loan_id, "regime": regime.name, **outcome_to_json(outcome)})
    print(json.dumps(results[0] if len(results) == 1 else results, indent=2))
    return 0


def cmd_benchmark(args) -> int:
    loans = read_loans(args.loans)
    regimes = _regimes(args.regimes)
    opts = InterpretOptions(restarts=args.restarts)
    with AuditWriter(args.audit) as sink:
        report, _ = run_benchmark(loans, regimes, opts, seed=args.seed, sink=sink)
    Path(args.out).write_text(json.dumps(report.to_json(), indent=2) + "\n")
    for row in report.rows:
        print(f"{row.name:<10} approved={row.approved:<6} rejected={row.rejected:<6} HAR={row.har:.1f}%")
    print(f"monotone: {report.monotonicity_verdict}")
    return 0


def cmd_audit_verify(args) -> int:
    result = verify_audit(read_audit(args.audit), _regimes(args.regimes), limit=args.limit)
    print(result.message())
    if not result.ok:
        print(f"first mismatching record index: {result.mismatches[0]}", file=sys.stderr)
        return 1
    return 0


def cmd_capacity(args) -> int:
    results = []
    for n in args.N:
        for gap in args.gaps:
            r = capacity_experiment(n, gap, trials=args.trials, seed=args.seed)
            results.append(r)
            print(f"N={n:<5} gap={gap:<5} m*={r.m_star}")
    write_capacity_csv(results, args.out)
    for (n, gap), c in scaling_constants(results).items():
        print(f"m* gap^2 / ln N at N={n}, gap={gap}: {c:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semsphere", description="Admissibility-first interpretation tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic loan CSV")
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--defect-rate", type=float, default=0.05)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--relaxed-band", action="store_true", help="also place clean loans between STANDARD and RELAXED")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decide", help="score a loan file against one regime")
    d.add_argument("--loan", required=True)
    d.add_argument("--regimes", help="regime config JSON (default: shipped config)")
    d.add_argument("--regime", default="STANDARD")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--restarts", type=int, default=8)
    d.set_defaults(func=cmd_decide)

    b = sub.add_parser("benchmark", help="run the regime sweep")
    b.add_argument("--loans", required=True)
    b.add_argument("--regimes")
    b.add_argument("--out", required=True)
    b.add_argument("--audit", required=True)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--restarts", type=int, default=8)
    b.set_defaults(func=cmd_benchmark)

    a = sub.add_parser("audit-verify", help="replay an audit log")
    a.add_argument("--audit", required=True)
    a.add_argument("--regimes")
    a.add_argument("--limit", type=int)
    a.set_defaults(func=cmd_audit_verify)

    c = sub.add_parser("capacity", help="sketch-length capacity sweep")
    c.add_argument("--N", type=int, nargs="+", default=[64, 256])
    c.add_argument("--gaps", type=float, nargs="+", default=[0.1, 0.2, 0.4])
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default="capacity.csv")
    c.set_defaults(func=cmd_capacity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, SemsphereError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
