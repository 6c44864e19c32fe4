"""Upper/lower PEP pairs, gap rows and direction-PEP tightness rows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import fr_direction_recursion
from .counterexample import extract_triplets
from .function_model import ClassParams
from .pep.builders import (
    build_direction_pep,
    build_exact_upper,
    build_lower_fixed_beta,
    build_lyapunov_upper,
    problem_basis,
)
from .pep.qcqp import QcqpProblem
from .solver.bnb import SolverOptions, solve
from .solver.local import stage2_local
from .solver.report import Incumbent, SolveReport, relative_gap
from .solver.stage1 import Stage1Error, embed, stage1_feasible

GAP_HEADLINE = 0.1


def direction_reference(eta: int, q: float, c: float) -> float:
    """Closed-form worst ||d_k||^2 / ||g_k||^2 of problem (D)."""
    return (1.0 + q) ** 2 / (4.0 * q) if eta == 1 else fr_direction_recursion(q, c)[0]


def upper_problem(eta: int, q: float, N: int, c: float | None, psd_mode: str = "lazy") -> QcqpProblem:
    p = ClassParams.from_q(q)
    if c is None:
        return build_exact_upper(eta, p, N, psd_mode=psd_mode)
    return build_lyapunov_upper(eta, p, c, N, psd_mode=psd_mode)


def upper_betas(prob: QcqpProblem, rep: SolveReport) -> list[float]:
    N = prob.meta["N"]
    return [rep.incumbent["scalars"][f"beta[{i}]"] for i in range(N - 1)]


def _upper_point(prob: QcqpProblem, rep: SolveReport) -> np.ndarray:
    z = np.zeros(prob.n_vars)
    prob.set_gram(z, np.asarray(rep.incumbent["G"]))
    for name, v in {**rep.incumbent["F"], **rep.incumbent["scalars"]}.items():
        z[prob.var(name)] = v
    return prob.complete(z)


def warm_start_lower(upper: QcqpProblem, rep: SolveReport, lower: QcqpProblem) -> np.ndarray:
    """Lower-problem point built from the upper incumbent's iterates.

    Step sizes come from least squares on ``x_i - x_{i+1} = gamma_i d_i``.
    """
    z = _upper_point(upper, rep)
    S = extract_triplets(upper, z)
    b = problem_basis(upper)
    G = upper.gram_matrix(z)
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    keep = w > 1e-12 * max(1.0, float(np.abs(w).max()))
    H = np.sqrt(w[keep])[:, None] * V[:, keep].T
    N = upper.meta["N"]
    betas = upper_betas(upper, rep)
    d = H @ b.d["0"].evaluate(z)
    cols = {"x[0]": S["0"].x, "d[0]": d}
    gam = {}
    for i in range(N):
        cols[f"g[{i}]"] = S[str(i)].g
        step = S[str(i)].x - S[str(i + 1)].x
        gam[f"gamma[{i}]"] = max(0.0, float(step @ d) / max(float(d @ d), 1e-300))
        if i < N - 1:
            d = S[str(i + 1)].g + betas[i] * d
    cols[f"g[{N}]"] = S[str(N)].g
    vals = {str(i): S[str(i)].f for i in range(N + 1)}
    return embed(lower, cols, vals, gam)


def lower_value(eta: int, q: float, N: int, c: float | None, betas: list[float], *,
                upper: QcqpProblem | None = None, upper_report: SolveReport | None = None,
                seed: int = 0, tol: float = 1e-8) -> tuple[QcqpProblem, Incumbent | None]:
    """Best feasible point of the frozen-parameter problem (a valid lower bound) or None."""
    p = ClassParams.from_q(q)
    prob = build_lower_fixed_beta(eta, p, c, N, betas)
    starts = []
    if upper is not None and upper_report is not None:
        z = warm_start_lower(upper, upper_report, prob)
        starts.append(Incumbent(z, prob.objective_value(z), "warm"))
    try:
        starts.append(stage1_feasible(prob, seed=seed, tol=tol, allow_infeasible=True))
    except Stage1Error:
        pass
    best = None
    for s in starts:
        r = stage2_local(prob, s, tol=tol)
        ok = prob.max_violation(r.z) <= tol and prob.box_violation(r.z) <= tol
        if ok and (best is None or r.value > best.value):
            best = r
    return prob, best


@dataclass
class GapRow:
    method: str
    family: str
    q: float
    N: int
    c: float | None
    upper: float
    upper_incumbent: float
    lower: float
    gap: float
    termination: str
    betas: list[float]

    @property
    def budget_limited(self) -> bool:
        return not self.termination.startswith("gap")

    def as_list(self) -> list:
        return [self.method, self.family, self.q, self.N, "" if self.c is None else self.c, self.upper,
                self.upper_incumbent, self.lower, self.gap, self.termination]


GAP_HEADER = ["method", "family", "q", "N", "c", "upper", "upper_incumbent", "lower", "gap", "termination"]


def gap_row(eta: int, q: float, N: int, family: str, opts: SolverOptions | None = None,
            c: float | None = None) -> tuple[GapRow, dict]:
    """Upper stage, parameters read off its incumbent, lower stage."""
    if family not in ("lyapunov", "exact"):
        raise ValueError("family must be 'lyapunov' or 'exact'")
    if family == "lyapunov" and c is None:
        c = (1.0 + q) ** 2 / (4.0 * q)
    if family == "exact":
        c = None
    opts = opts or SolverOptions()
    up = upper_problem(eta, q, N, c)
    rep = solve(up, opts)
    betas = upper_betas(up, rep)
    low, inc = lower_value(eta, q, N, c, betas, upper=up, upper_report=rep, seed=opts.seed, tol=opts.feas_tol)
    lower = inc.value if inc is not None else -math.inf
    row = GapRow("PRP" if eta == 1 else "FR", family, q, N, c, rep.upper_bound, rep.incumbent_value, lower,
                 relative_gap(rep.upper_bound, lower), rep.termination, betas)
    return row, {"upper": rep, "lower_problem": low, "lower": inc}


TIGHTNESS_HEADER = ["method", "q", "c", "analytic", "certified", "incumbent", "rel_error", "nodes", "termination"]


def tightness_row(eta: int, q: float, c: float, opts: SolverOptions | None = None) -> tuple[list, SolveReport]:
    ref = direction_reference(eta, q, c)
    rep = solve(build_direction_pep(eta, ClassParams.from_q(q), c), opts or SolverOptions())
    err = abs(rep.upper_bound - ref) / ref
    return ["PRP" if eta == 1 else "FR", q, c, ref, rep.upper_bound, rep.incumbent_value, err, rep.nodes,
            rep.termination], rep
