"""Command-line entry point: ``ncgpep <subcommand> ...``.

Exit status is 1 when a checked assertion fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, identities
from .counterexample import extract_triplets, load_example1, validate_counterexample
from .experiments import (
    GAP_HEADER,
    GAP_HEADLINE,
    TIGHTNESS_HEADER,
    gap_row,
    lower_value,
    tightness_row,
    upper_betas,
    upper_problem,
)
from .function_model import ClassParams, TripletSet, quadratic_oracle
from .ncgm import MethodConfig, run
from .pep.builders import build_direction_pep, build_lower_fixed_beta
from .solver.bnb import SolverOptions, solve
from .solver.stage1 import random_quadratic

GAP_Q = [0.001, 0.005, 0.02, 0.04, 0.06, 0.08, 0.1, 0.3, 0.5]
TIGHT_Q = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
TIGHT_C = [1.01, 10.0, 50.0]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _eta(method: str) -> int:
    m = method.upper()
    if m not in ("PRP", "FR"):
        raise SystemExit(f"unknown method {method!r} (PRP or FR)")
    return 1 if m == "PRP" else 0


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _opts(args) -> SolverOptions:
    return SolverOptions(tol_rel=args.tol, max_nodes=args.nodes, max_time=args.time, seed=args.seed,
                         cuts_init=args.cuts_init)


# ---------------------------------------------------------------------------


def cmd_bounds(args) -> int:
    qs = _floats(args.q) if args.q else [float(q) for q in bounds.Q_GRID]
    for q in qs:
        if not 0.0 <= q <= 1.0:
            raise SystemExit(f"q must lie in [0, 1], got {q}")
    rows = [bounds.bounds_row(q, args.k, args.variant) for q in qs]
    _emit(args, _csv(bounds.BOUNDS_HEADER, rows))
    return 0


def cmd_pep_solve(args) -> int:
    eta = _eta(args.method)
    p = ClassParams.from_q(args.q)
    if args.family == "direction":
        prob = build_direction_pep(eta, p, args.c, psd_mode=args.psd_mode)
    elif args.family == "lower":
        betas = _floats(args.betas) if args.betas else []
        prob = build_lower_fixed_beta(eta, p, None if args.exact else args.c, args.N, betas,
                                      psd_mode=args.psd_mode)
    else:
        prob = upper_problem(eta, args.q, args.N, None if args.family == "exact" else args.c, args.psd_mode)
    rep = solve(prob, _opts(args))
    _emit(args, rep.to_json(timing=args.timing) + "\n")
    return 0 if rep.incumbent_value <= rep.upper_bound + 1e-9 * max(1.0, abs(rep.upper_bound)) else 1


def cmd_gap_table(args) -> int:
    eta = _eta(args.method)
    qs = _floats(args.q) if args.q else GAP_Q
    rows, bad = [], False
    for q in qs:
        row, _ = gap_row(eta, q, args.N, args.family, _opts(args), c=args.c)
        rows.append(row.as_list())
        if not row.budget_limited and not row.gap <= GAP_HEADLINE:
            bad = True
    _emit(args, _csv(GAP_HEADER, rows))
    return 1 if bad else 0


def cmd_tightness(args) -> int:
    eta = _eta(args.method)
    qs = _floats(args.q) if args.q else TIGHT_Q
    cs = _floats(args.c) if args.c else TIGHT_C
    rows, bad = [], False
    for q in qs:
        for c in cs:
            row, _ = tightness_row(eta, q, c, _opts(args))
            rows.append(row)
            bad |= not row[6] <= args.tol
    _emit(args, _csv(TIGHTNESS_HEADER, rows))
    return 1 if bad else 0


def cmd_counterexample(args) -> int:
    if args.action == "generate":
        eta = _eta(args.method)
        c = None if args.family == "exact" else (args.c or (1.0 + args.q) ** 2 / (4.0 * args.q))
        up = upper_problem(eta, args.q, args.N, c)
        rep = solve(up, _opts(args))
        betas = upper_betas(up, rep)
        low, inc = lower_value(eta, args.q, args.N, c, betas, upper=up, upper_report=rep, seed=args.seed)
        if inc is None:
            print("no feasible lower-stage point", file=sys.stderr)
            return 1
        S = extract_triplets(low, inc.z)
        d = S.to_json_dict(ClassParams.from_q(args.q))
        d.update(method=args.method.upper(), steps=args.N, d0="gradient" if c is None else "infer",
                 betas=betas, value=inc.value)
        _emit(args, json.dumps(d, indent=2) + "\n")
        return 0
    if args.file == "example1":
        S, p = load_example1()
        meta = {"method": "PRP", "steps": 2, "d0": "infer"}
    else:
        d = json.loads(Path(args.file).read_text())
        S, p = TripletSet.from_json_dict(d)
        meta = d
    v = validate_counterexample(S, p, meta.get("method", "PRP"), meta.get("steps"), d0=meta.get("d0", "infer"),
                                tol=args.feas_tol)
    _emit(args, json.dumps(v.to_dict(), indent=2) + "\n")
    return 0 if v.ok else 1


def cmd_verify_identities(args) -> int:
    res = {
        "prp": identities.verify_prp_identity(args.trials, args.dim, args.seed),
        "fr_beta": identities.verify_fr_beta_identity(args.trials, args.dim, args.seed),
        "fr_direction": identities.verify_fr_direction_identity(args.trials, args.dim, args.seed),
    }
    signs = identities.verify_sign_conditions(args.trials, args.dim, args.seed)
    out = {"trials": args.trials, "dim": args.dim, "seed": args.seed, "max_residual": res,
           "sign_conditions": signs, "tolerance": 1e-9}
    _emit(args, json.dumps(out, indent=2, default=float) + "\n")
    ok = all(v <= 1e-9 for v in res.values()) and signs["all_nonnegative"]
    return 0 if ok else 1


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    p = ClassParams.from_q(args.q)
    A = random_quadratic(rng, args.dim, p.mu, p.L)
    x0 = rng.standard_normal(args.dim)
    tr = run(quadratic_oracle(A), x0, MethodConfig(args.method, max_iters=args.iters), L=p.L)
    _emit(args, tr.to_csv())
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncgpep", description="Worst-case analysis of nonlinear conjugate gradient.")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-3, help="relative gap / tightness tolerance")
    ap.add_argument("--out", default=None, help="write output here instead of stdout")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def solver_flags(sp):
        sp.add_argument("--nodes", type=int, default=100_000)
        sp.add_argument("--time", type=float, default=600.0)
        sp.add_argument("--cuts-init", type=int, default=0)
        sp.add_argument("--psd-mode", choices=("lazy", "cholesky"), default="lazy")

    sp = sub.add_parser("bounds", help="analytic rate table")
    sp.add_argument("--q", default=None, help="comma-separated q values (default: fine grid)")
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--variant", choices=("proof", "statement"), default="proof")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("pep-solve", help="solve one PEP and print the SolveReport")
    sp.add_argument("--family", choices=("direction", "lyapunov", "exact", "lower"), default="direction")
    sp.add_argument("--method", default="PRP")
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--N", type=int, default=1)
    sp.add_argument("--betas", default=None)
    sp.add_argument("--exact", action="store_true", help="lower family: start with d_0 = g_0")
    sp.add_argument("--timing", action="store_true", help="include wall time in the report")
    solver_flags(sp)
    sp.set_defaults(func=cmd_pep_solve)

    sp = sub.add_parser("gap-table", help="upper/lower gaps")
    sp.add_argument("--method", default="PRP")
    sp.add_argument("--family", choices=("lyapunov", "exact"), default="lyapunov")
    sp.add_argument("--q", default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--N", type=int, default=2)
    solver_flags(sp)
    sp.set_defaults(func=cmd_gap_table)

    sp = sub.add_parser("tightness", help="direction PEP against the closed form")
    sp.add_argument("--method", default="PRP")
    sp.add_argument("--q", default=None)
    sp.add_argument("--c", default=None)
    solver_flags(sp)
    sp.set_defaults(func=cmd_tightness)

    sp = sub.add_parser("counterexample", help="generate or validate worst-case triplets")
    csub = sp.add_subparsers(dest="action", required=True)
    g = csub.add_parser("generate")
    g.add_argument("--method", default="PRP")
    g.add_argument("--family", choices=("lyapunov", "exact"), default="exact")
    g.add_argument("--q", type=float, required=True)
    g.add_argument("--c", type=float, default=None)
    g.add_argument("--N", type=int, default=2)
    solver_flags(g)
    v = csub.add_parser("validate")
    v.add_argument("file", help="triplet JSON, or 'example1' for the bundled fixture")
    v.add_argument("--feas-tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("verify-identities", help="random-sample check of the proof identities")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--dim", type=int, default=2)
    sp.set_defaults(func=cmd_verify_identities)

    sp = sub.add_parser("simulate", help="run a method on a random quadratic")
    sp.add_argument("--method", default="PRP", choices=("PRP", "FR", "GDEL"))
    sp.add_argument("--q", type=float, default=0.1)
    sp.add_argument("--dim", type=int, default=10)
    sp.add_argument("--iters", type=int, default=20)
    sp.set_defaults(func=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return int(args.func(args))


if __name__ == "__main__":
    raise SystemExit(main())
