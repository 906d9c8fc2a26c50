"""Command-line entry point: ``latentrec {simulate,sweep,theory,verify,regularity}``."""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import theory
from .harness import ExperimentSpec, fmt_float, monte_carlo, sweep, verify_suite, write_csv, write_verify_csv
from .instrumentation import ConstraintViolated
from .regularity import estimate_regularity_prob


def _spec_from_args(args) -> ExperimentSpec:
    doc = json.loads(Path(args.config).read_text()) if args.config else {}
    for key, attr in (("n_users", "N"), ("n_user_types", "q_U"), ("n_item_types", "q_I"),
                      ("horizons", "T"), ("strategies", "strategies"), ("checkpoints", "checkpoints")):
        value = getattr(args, attr, None)
        if value is not None:
            doc[key] = value
    if args.seed is not None:
        doc["base_seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    if args.audit is not None:
        doc["audit"] = args.audit == "on"
    if args.params_mode is not None:
        doc["params_mode"] = args.params_mode
    for key in ("s_I", "s_U", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    missing = [k for k in ("n_users", "n_user_types", "n_item_types", "horizons") if k not in doc]
    if missing:
        raise SystemExit(f"missing settings: {', '.join(missing)} (use --config or flags)")
    return ExperimentSpec.from_dict(doc)


def _out(path):
    return open(path, "w", newline="") if path else contextlib.nullcontext(sys.stdout)


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON experiment document")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--seed", type=int, help="base seed; trial k uses seed+k")
    p.add_argument("--trials", type=int)
    p.add_argument("--audit", choices=("on", "off"))
    p.add_argument("--params-mode", dest="params_mode", choices=("max-T", "per-T"))
    p.add_argument("--N", type=int, nargs="+")
    p.add_argument("--q-U", dest="q_U", type=int, nargs="+")
    p.add_argument("--q-I", dest="q_I", type=int, nargs="+")
    p.add_argument("--T", type=int, nargs="+", help="horizons")
    p.add_argument("--checkpoints", type=int, nargs="+")
    p.add_argument("--strategies", nargs="+")
    p.add_argument("--s-I", dest="s_I", type=int)
    p.add_argument("--s-U", dest="s_U", type=int)
    p.add_argument("--workers", type=int)


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    if len(spec.configs()) != 1:
        raise SystemExit("simulate takes one configuration; use sweep for grids")
    with _out(args.out) as fh:
        write_csv(monte_carlo(spec), fh)
    return 0


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    with _out(args.out) as fh:
        write_csv(sweep(spec), fh)
    return 0


def cmd_theory(args) -> int:
    if args.T:
        Ts = sorted(set(args.T))
    else:
        Ts = sorted(set(np.unique(np.geomspace(1, args.T_max, args.points).round().astype(int)).tolist()))
    with _out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "R", "regime", "R_U", "R_I", "lower", "violations"])
        for T in Ts:
            tp = theory.theory_point(args.N, args.q_U, args.q_I, T)
            w.writerow([T, fmt_float(tp.R), tp.regime, fmt_float(tp.R_U), fmt_float(tp.R_I), fmt_float(tp.lower),
                        ";".join(tp.violations)])
    return 0


def cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    rows, rates = verify_suite(spec)
    rates_out = args.rates_out
    with _out(args.out) as fh:
        if rates_out:
            write_verify_csv(rows, rates, fh, rates_out)
        else:
            write_verify_csv(rows, rates, fh, fh)
    failed = [r for r in rows if r.status == "FAIL"]
    if failed:
        print(f"{len(failed)} constraint check(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_regularity(args) -> int:
    est = estimate_regularity_prob(args.m, args.n, args.s, args.eta, args.trials, args.seed or 0)
    with _out(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n", "s", "eta", "trials", "rate", "ci_low", "ci_high", "bound", "consistent"])
        w.writerow([args.m, args.n, args.s, fmt_float(args.eta), args.trials, fmt_float(est.rate), fmt_float(est.ci_low),
                    fmt_float(est.ci_high), fmt_float(est.bound), int(est.consistent)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo regret curves for one configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="Monte Carlo over a parameter grid")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="audit traces and check the counting constraints")
    _add_experiment_flags(p)
    p.add_argument("--rates-out", help="CSV path for per-category dislike rates")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("theory", help="closed-form curves over a T grid")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--q-U", dest="q_U", type=int, required=True)
    p.add_argument("--q-I", dest="q_I", type=int, required=True)
    p.add_argument("--T", type=int, nargs="+")
    p.add_argument("--T-max", dest="T_max", type=int, default=1000)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("regularity", help="Monte Carlo check of the regularity probability bound")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_regularity)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConstraintViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
