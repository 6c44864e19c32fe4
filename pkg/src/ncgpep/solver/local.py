"""Stage 2: local improvement with the Gram matrix factored as G = H^T H.

Working in (H, F, scalars) keeps G positive semidefinite by construction;
SLSQP handles the remaining equalities and inequalities.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import qr
from scipy.optimize import minimize

from ..pep.qcqp import QcqpProblem
from .compiled import CompiledQuads
from .report import Incumbent

FEAS_TOL = 1e-8


class _Factored:
    """Maps the reduced vector y (all non-G variables) to full points."""

    def __init__(self, prob: QcqpProblem):
        self.prob = prob
        kinds = prob.kinds()
        self.free = np.flatnonzero(kinds != "G")
        n = prob.gram_size
        self.n = n
        iu = np.triu_indices(n)
        self.iu = iu
        self.g_idx = prob.gram_index[iu]
        self.h_idx = prob.h_index
        pos = -np.ones(prob.n_vars, dtype=int)
        pos[self.free] = np.arange(self.free.size)
        self.h_pos = pos[self.h_idx]  # (n, n) positions in y
        self.off = iu[0] != iu[1]

    def lift(self, y: np.ndarray) -> np.ndarray:
        z = np.zeros(self.prob.n_vars)
        z[self.free] = y
        H = y[self.h_pos]
        G = H.T @ H
        z[self.g_idx] = G[self.iu]
        return z

    def chain(self, Jz: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Jacobian in y from the Jacobian in z (rows: functions)."""
        Jy = Jz[:, self.free].copy()
        H = y[self.h_pos]
        n = self.n
        Ghat = np.zeros((Jz.shape[0], n, n))
        w = Jz[:, self.g_idx]
        w = np.where(self.off, 0.5 * w, w)
        Ghat[:, self.iu[0], self.iu[1]] = w
        Ghat[:, self.iu[1], self.iu[0]] = w
        dH = 2.0 * np.einsum("rc,mcd->mrd", H, Ghat)
        Jy[:, self.h_pos.ravel()] += dH.reshape(Jz.shape[0], -1)
        return Jy


def _complete_factor(prob: QcqpProblem, z: np.ndarray) -> np.ndarray:
    """Replace the stored factor by one consistent with G (clipping negative modes)."""
    from ..pep.qcqp import gram_factor

    z = np.array(z, dtype=float)
    G = prob.gram_matrix(z)
    H = prob.factor_matrix(z)
    if not np.allclose(H.T @ H, G, atol=1e-12, rtol=0):
        prob.set_gram(z, G, gram_factor(G))
    return z


def stage2_local(prob: QcqpProblem, inc: Incumbent, *, maxiter: int = 400, tol: float = FEAS_TOL) -> Incumbent:
    """Local NLP from ``inc``; falls back to ``inc`` when no better feasible point is found."""
    fx = _Factored(prob)
    cons = [c for c in prob.constraints]
    eq = [c.expr for c in cons if c.sense == "=="]
    le = [c.expr if c.sense == "<=" else _neg(c.expr) for c in cons if c.sense != "=="]
    z0 = _complete_factor(prob, inc.z)
    lb, ub = prob.bounds()
    if eq:
        eq = _independent(eq, fx, z0)
    Ceq = CompiledQuads(eq, prob.n_vars)
    Cle = CompiledQuads(le, prob.n_vars)
    Cobj = CompiledQuads([prob.objective], prob.n_vars)
    bnds = [(None if not np.isfinite(a) else a, None if not np.isfinite(b) else b)
            for a, b in zip(lb[fx.free], ub[fx.free])]

    def fun(y):
        return -float(Cobj.value(fx.lift(y))[0])

    def jac(y):
        return -fx.chain(Cobj.jacobian(fx.lift(y)), y)[0]

    constraints = []
    if Ceq.m:
        constraints.append({"type": "eq", "fun": lambda y: Ceq.value(fx.lift(y)),
                            "jac": lambda y: fx.chain(Ceq.jacobian(fx.lift(y)), y)})
    if Cle.m:
        constraints.append({"type": "ineq", "fun": lambda y: -Cle.value(fx.lift(y)),
                            "jac": lambda y: -fx.chain(Cle.jacobian(fx.lift(y)), y)})

    y0 = np.clip(z0[fx.free], lb[fx.free], ub[fx.free])
    start_ok = _feasible(prob, inc.z, tol)
    best = inc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            res = minimize(fun, y0, jac=jac, bounds=bnds, constraints=constraints, method="SLSQP",
                           options={"maxiter": maxiter, "ftol": 1e-13})
            y = res.x
        except (ValueError, np.linalg.LinAlgError):
            return inc
    z = prob.complete(fx.lift(y))
    z = _polish(prob, fx, z, Ceq, Cle)
    if _feasible(prob, z, tol):
        val = prob.objective_value(z)
        if not start_ok or val >= inc.value:
            best = Incumbent(z, val, "stage2")
    return best


def _independent(eq: list, fx: _Factored, z: np.ndarray, rtol: float = 1e-9) -> list:
    """Equalities with linearly independent Jacobian rows at ``z``.

    Products such as ``gamma * G[a,b] = 0`` next to ``G[a,b] = 0`` make the
    Jacobian rank deficient, which breaks the SLSQP subproblem; dropped rows
    are still checked on the final point.
    """
    C = CompiledQuads(eq, fx.prob.n_vars)
    J = fx.chain(C.jacobian(z), z[fx.free])
    _, R, piv = qr(J.T, pivoting=True, mode="economic")
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return []
    rank = int(np.sum(d > rtol * d[0]))
    keep = sorted(piv[:rank])
    return [eq[i] for i in keep]


def _neg(e):
    out = e.copy()
    out.const = -out.const
    out.lin = {k: -v for k, v in out.lin.items()}
    out.quad = {k: -v for k, v in out.quad.items()}
    return out


def _feasible(prob: QcqpProblem, z: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.isfinite(z))) and prob.max_violation(z) <= tol and prob.box_violation(z) <= tol


def _polish(prob: QcqpProblem, fx: _Factored, z: np.ndarray, Ceq: CompiledQuads, Cle: CompiledQuads,
            steps: int = 5) -> np.ndarray:
    """Gauss-Newton projection onto equalities and violated inequalities.

    SLSQP stops at ~1e-9 feasibility; a few minimum-norm corrections in the
    factored space bring the residual to round-off without moving the value
    beyond the same order.
    """
    y = z[fx.free].copy()
    lb, ub = prob.bounds()
    lo, hi = lb[fx.free], ub[fx.free]
    for _ in range(steps):
        zz = fx.lift(y)
        r_eq = Ceq.value(zz) if Ceq.m else np.zeros(0)
        r_le = Cle.value(zz) if Cle.m else np.zeros(0)
        act = r_le > -1e-12
        r = np.concatenate([r_eq, np.maximum(r_le[act], 0.0)])
        if r.size == 0 or np.abs(r).max() < 1e-13:
            break
        J = []
        if Ceq.m:
            J.append(fx.chain(Ceq.jacobian(zz), y))
        if act.any():
            J.append(fx.chain(Cle.jacobian(zz), y)[act])
        Jm = np.vstack(J)
        step, *_ = np.linalg.lstsq(Jm, r, rcond=1e-12)
        y = np.clip(y - step, lo, hi)
    return prob.complete(fx.lift(y))
