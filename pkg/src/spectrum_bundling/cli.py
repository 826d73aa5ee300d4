"""Command-line entry point: ``sweep``, ``verify`` and ``eq``.

``SPECTRUM_EQ_MAXITER`` caps both the Wardrop iterations and the
best-response rounds.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .experiments import bundled_scenarios, load_spec, run_sweep
from .market import Mode, make_market
from .nash import find_equilibrium


def _cmd_sweep(args) -> int:
    scenarios = bundled_scenarios()
    spec = scenarios[args.spec] if args.spec in scenarios else load_spec(args.spec)
    text = run_sweep(spec, args.output)
    if not (args.output or spec.output):
        sys.stdout.write(text)
    return 0


def _cmd_verify(args) -> int:
    from .verification import run_theorem_suite

    results = run_theorem_suite(args.filter, args.mutate)
    if args.json:
        json.dump([r.as_dict() for r in results], sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for r in results:
            print(r.line())
    if not results:
        print(f"no checks match {args.filter!r}", file=sys.stderr)
        return 2
    return 0 if all(r.passed for r in results) else 1


def _cmd_eq(args) -> int:
    B = [float(b) for b in args.B.split(",")] if args.B else []
    if args.M is not None and len(B) == 1 and args.M > 1:
        B = B * args.M  # one value for all incumbents
    if args.M is not None and len(B) != args.M:
        print(f"--B gives {len(B)} bandwidths but --M is {args.M}", file=sys.stderr)
        return 2
    W = args.W if args.W.lower() in ("inf", "infinity") else float(args.W)
    config = make_market(B, args.N, W, args.alpha, mode=Mode(args.mode))
    res = find_equilibrium(config)
    out = {
        "prices": res.prices.prices,
        "unlicensed_prices": res.prices.unlicensed,
        "masses": res.solution.alloc.masses,
        "unlicensed_masses": res.solution.alloc.unlicensed,
        "profits": res.profits,
        "Q": res.welfare.total_mass,
        "CS": res.welfare.consumer_surplus,
        "SW": res.welfare.social_welfare,
        "eps_ne": res.eps_ne,
        "iterations": res.iterations,
        "converged": res.converged,
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if res.converged else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectrum-bundling", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a scenario file (or a bundled scenario name) and emit CSV")
    p.add_argument("spec")
    p.add_argument("-o", "--output", help="CSV path; defaults to the scenario's own output field or stdout")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--filter", help="only checks whose name contains this text")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.add_argument("--mutate", help="perturb the oracle of the named check (harness self-test)")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("eq", help="solve one pricing equilibrium")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="bundled")
    p.add_argument("--B", default="1", help="comma-separated licensed bandwidths")
    p.add_argument("--W", default="1", help="unlicensed bandwidth")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--M", type=int, help="number of incumbents (repeats a single --B value)")
    p.add_argument("--N", type=int, default=0, help="number of entrants")
    p.set_defaults(func=_cmd_eq)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
