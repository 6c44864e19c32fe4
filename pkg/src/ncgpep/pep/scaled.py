"""Step-scaled equivalent of the direction-quality PEP.

The direction PEP is stated on the Gram basis ``[x_{k-1}, g_{k-1}, g_k, d_{k-1}]``
with scalars ``beta`` and ``gamma``. Substituting ``s = x_k - x_{k-1} = -gamma d_{k-1}``,
``tau = 1/gamma`` and ``omega = beta/gamma`` gives the same problem on
``[x_{k-1}, g_{k-1}, g_k, s]``:

* interpolation becomes linear in G,
* ``beta d_{k-1} = -omega s``, so the objective is ``1 + omega^2 ||s||^2``,
* the parameter definition reads ``-omega <g_{k-1}, s> = ||g_k||^2 - eta <g_k, g_{k-1}>``.

All constraints are then (scalar x G) products, which the relaxation lifts
and multiplies out (RLT) far more tightly than the (beta, gamma) form. The
sum of the two interpolation inequalities (F cancels) is added as an
implied constraint so that it can be multiplied by ``omega^2``.
"""

from __future__ import annotations

import math

import numpy as np

from ..bounds import asd_rate, epsilon_from_c
from ..function_model import ClassParams
from .builders import _Builder, _check_eta, _imul, beta_box
from .qcqp import QcqpProblem, QuadExpr
from .selectors import DataMatrices, SelectorBasis, ordered_pairs

SCALED_FAMILY = "direction-scaled"


def build_scaled_direction(eta: int, params: ClassParams, c_prev: float, *, coupling: str = "<=",
                           gram_cap: float | None = None, psd_mode: str = "lazy") -> QcqpProblem:
    eta = _check_eta(eta)
    p = params
    q = p.q
    rho = asd_rate(q, epsilon_from_c(c_prev))
    g_lo = q / rho
    U = float(gram_cap) if gram_cap is not None else 8.0 / (q * rho)
    g_max = 1.0 / p.mu
    g_min = 1.0 / (p.L * c_prev)
    B = _Builder(f"direction-scaled(eta={eta},q={q:g},c={c_prev:g})", 4, ["-1", "0"], psd_mode)
    prob = B.prob
    B.gram_boxes(diag_ub=[U, U, 1.0, g_max**2 * c_prev * U], diag_lb=[0.0, g_lo, 1.0, g_min**2 * g_lo],
                 heuristic=[True, True, False, True])
    tau = B.scalar("tau[-1]", "tau", 1.0 / g_max, 1.0 / g_min)
    blo, bhi = beta_box(eta, q)
    if eta == 0:
        blo = max(blo, 1.0 / U)
    wlo, whi = _imul((blo, bhi), (1.0 / g_max, 1.0 / g_min))
    omega = B.scalar("omega[-1]", "omega", wlo, whi)
    fmax = U * g_max + 1.0
    for k in B.f_index:
        B.set_box(k, -fmax, fmax, heuristic=True)

    b = SelectorBasis(4, 2, ["-1", "0"], column_names=["x[-1]", "g[-1]", "g[0]", "s"])
    b.x["-1"] = b.e(0)
    b.g["-1"] = b.e(1)
    b.g["0"] = b.e(2)
    b.d["-1"] = b.e(3).scale(-1.0, tau)
    b.x["0"] = b.e(0) + b.e(3)
    b.d["0"] = b.e(2) + b.e(3).scale(-1.0, omega)
    b.f["-1"] = b.fe(0)
    b.f["0"] = b.fe(1)
    dm = DataMatrices(b)
    gi = prob.gram_index

    prob.objective = B.trace(dm.Ct_star("0"), theta="Theta")
    B.constrain(B.trace(dm.Dt("-1", "-1")), "==", B.trace(dm.C_star("-1")), "<g[-1],d[-1]> = ||g[-1]||^2")
    # <g[0], d[-1]> = 0 and <g[0], x[-1] - x[0]> = 0 coincide once tau > 0
    B.constrain(B.trace(dm.A("-1", "0")), "==", 0.0, "<g[0],s> = 0")
    lhs = QuadExpr()
    lhs.add_quad(omega, int(gi[1, 3]), -1.0)
    B.constrain(lhs, "==", B.trace(dm.C_star("0") - dm.D("0", "-1").scale(eta)), "parameter definition(-1)")
    rhs = QuadExpr().iadd(B.trace(dm.C_star("-1")), c_prev)
    B.constrain(B.trace(dm.Ct_star("-1"), theta="Phi"), coupling, rhs, "direction quality(-1)")
    n0 = len(prob.constraints)
    for i, j in ordered_pairs(b.labels):
        B.interpolation(dm, p, i, j, theta_B=False)
    total = QuadExpr()
    for con in prob.constraints[n0:]:
        total.iadd(con.expr)
    total = total.prune(1e-14)
    if any(k in total.lin for k in B.f_index):
        raise AssertionError("function values do not cancel in the interpolation sum")
    prob.add_constraint(total, "<=", "implied: interpolation sum")
    B.constrain(B.trace(dm.C_star("0")), "==", 1.0, "normalization ||g[0]||^2 = 1")

    prob.meta.update(family=SCALED_FAMILY, eta=eta, mu=p.mu, L=p.L, q=q, c=c_prev, coupling=coupling,
                     gram_cap=U, scalars={"omega[-1]": omega, "tau[-1]": tau})
    B.attach_basis(b)
    return prob


def scaled_from_direction(prob: QcqpProblem) -> QcqpProblem:
    m = prob.meta
    return build_scaled_direction(m["eta"], ClassParams(m["mu"], m["L"]), m["c"], coupling=m["coupling"],
                                  gram_cap=m["gram_cap"], psd_mode=prob.psd_mode)


def _transfer(src: QcqpProblem, dst: QcqpProblem, z: np.ndarray, scale: float,
              scalars: dict[str, float]) -> np.ndarray:
    G = src.gram_matrix(z).copy()
    G[3, :] *= scale
    G[:, 3] *= scale
    out = np.zeros(dst.n_vars)
    dst.set_gram(out, G)
    for k_src, k_dst in zip(src.meta["f_index"], dst.meta["f_index"]):
        out[k_dst] = z[k_src]
    for name, v in scalars.items():
        out[dst.var(name)] = v
    return dst.complete(out)


def to_scaled(direction: QcqpProblem, scaled: QcqpProblem, z: np.ndarray) -> np.ndarray:
    gam = float(z[direction.var("gamma[-1]")])
    beta = float(z[direction.var("beta[-1]")])
    if not gam > 0.0:
        raise ValueError("step size must be positive")
    return _transfer(direction, scaled, z, -gam, {"tau[-1]": 1.0 / gam, "omega[-1]": beta / gam})


def to_direction(scaled: QcqpProblem, direction: QcqpProblem, z: np.ndarray) -> np.ndarray:
    tau = float(z[scaled.var("tau[-1]")])
    omega = float(z[scaled.var("omega[-1]")])
    if not (tau > 0.0 and math.isfinite(tau)):
        raise ValueError("tau must be positive")
    return _transfer(scaled, direction, z, -tau, {"gamma[-1]": 1.0 / tau, "beta[-1]": omega / tau})
