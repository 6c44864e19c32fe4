"""Builders for the four performance-estimation QCQP families.

* :func:`build_direction_pep` -- worst next search direction quality (D),
  Gram layout ``[x_{k-1} | g_{k-1} | g_k | d_{k-1}]``.
* :func:`build_lyapunov_upper` -- relaxation bounding f_{k+N}/f_k over N
  steps from a pair (x_k, d_k) of quality ``c``, Gram layout
  ``[d_k | g_k .. g_{k+N} | x_k .. x_{k+N}]``.
* :func:`build_exact_upper` -- same relaxation started from d_0 = g_0.
* :func:`build_lower_fixed_beta` -- the exact-line-search problem with the
  CG parameters frozen, Gram layout ``[x_k | g_k .. g_{k+N} | d_k]``; any
  feasible point is a valid lower bound.

Labels are ``"*"`` for the minimizer and ``"0", "1", ...`` for the iterates
``k, k+1, ...`` (``"-1"`` and ``"0"`` for the pair ``k-1, k`` in (D)).
Normalizations: ``||g_k||^2 = 1`` for (D), ``f_k - f_* = 1`` otherwise.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..bounds import asd_rate, epsilon_from_c
from ..function_model import ClassParams
from .qcqp import QcqpProblem, QuadExpr
from .selectors import DataMatrices, Monomial, SelectorBasis, SymMat, SymVec, ordered_pairs

METHOD_ETA = {"PRP": 1, "FR": 0}


def _check_eta(eta: int) -> int:
    if eta not in (0, 1):
        raise ValueError(f"eta must be 0 (FR) or 1 (PRP), got {eta!r}")
    return int(eta)


def beta_box(eta: int, q: float) -> tuple[float, float]:
    """Valid range of a CG parameter on F_{mu,L} with normalized f_k - f_* > 0.

    ``||g_{i+1}||^2 <= 2L f_{i+1} <= 2L f_i <= ||g_i||^2 / q`` bounds the
    gradient growth of one exact-line-search step, hence the range below.
    """
    if eta == 0:
        return 0.0, 1.0 / q
    b = 1.0 / q + 1.0 / math.sqrt(q)
    return -b, b


# ---------------------------------------------------------------------------
# interval helpers (boxes of derived variables)


def _imul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(p), max(p)


def _isq(a: tuple[float, float]) -> tuple[float, float]:
    lo, hi = a
    if lo >= 0:
        return lo * lo, hi * hi
    if hi <= 0:
        return hi * hi, lo * lo
    return 0.0, max(lo * lo, hi * hi)


def poly_interval(poly: dict[Monomial, float], prob: QcqpProblem) -> tuple[float, float]:
    lo = hi = 0.0
    for m, c in poly.items():
        if not m:
            r = (1.0, 1.0)
        elif len(m) == 1:
            v = prob.variables[m[0]]
            r = (v.lb, v.ub)
        elif len(m) == 2 and m[0] == m[1]:
            v = prob.variables[m[0]]
            r = _isq((v.lb, v.ub))
        else:
            r = (1.0, 1.0)
            for i in m:
                v = prob.variables[i]
                r = _imul(r, (v.lb, v.ub))
        t = _imul(r, (c, c))
        lo += t[0]
        hi += t[1]
    return lo, hi


# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, name: str, gram_size: int, f_labels: Sequence[str], psd_mode: str):
        self.prob = QcqpProblem(name, gram_size, psd_mode)
        self.f_index = [self.prob.add_variable(f"F[{lab}]", "F", -np.inf, np.inf) for lab in f_labels]

    # variables
    def scalar(self, name: str, kind: str, lb: float, ub: float, heuristic: bool = False) -> int:
        return self.prob.add_variable(name, kind, lb, ub, heuristic)

    def set_box(self, idx: int, lb: float, ub: float, heuristic: bool = False) -> None:
        v = self.prob.variables[idx]
        v.lb, v.ub, v.heuristic = float(lb), float(ub), heuristic

    def gram_boxes(self, diag_ub: Sequence[float], diag_lb: Sequence[float] | None = None,
                   heuristic: Sequence[bool] | None = None) -> None:
        n = self.prob.gram_size
        diag_lb = diag_lb if diag_lb is not None else [0.0] * n
        heuristic = heuristic if heuristic is not None else [False] * n
        for i in range(n):
            for j in range(i, n):
                k = int(self.prob.gram_index[i, j])
                if i == j:
                    self.set_box(k, diag_lb[i], diag_ub[i], heuristic[i])
                else:
                    r = math.sqrt(diag_ub[i] * diag_ub[j])
                    self.set_box(k, -r, r, heuristic[i] or heuristic[j])
        for r in range(n):
            for c in range(n):
                s = math.sqrt(diag_ub[c])
                self.set_box(int(self.prob.h_index[r, c]), -s, s, heuristic[c])

    # expressions
    def poly_expr(self, poly: dict[Monomial, float]) -> QuadExpr:
        e = QuadExpr()
        for m, c in poly.items():
            if len(m) == 0:
                e.const += c
            elif len(m) == 1:
                e.add_lin(m[0], c)
            elif len(m) == 2:
                e.add_quad(m[0], m[1], c)
            else:
                raise ValueError("polynomial of degree > 2 cannot enter a QCQP directly")
        return e

    def f_expr(self, a: np.ndarray) -> QuadExpr:
        e = QuadExpr()
        for k, c in zip(self.f_index, a):
            e.add_lin(k, float(c))
        return e

    def trace(self, M: SymMat, theta: str | None = None) -> QuadExpr:
        """``tr(G M)`` as a quadratic expression.

        With ``theta`` given, every nonconstant entry of ``M`` is replaced by
        a copy variable ``theta[a,b]`` pinned by an equality, so entries of
        degree two leave a bilinear (copy x Gram) product only.
        """
        prob = self.prob
        n = prob.gram_size
        e = QuadExpr()
        if theta is None:
            if M.degree() > 1:
                raise ValueError("degree-2 matrix entries need a Theta copy")
            for m, Mm in M.terms.items():
                for a in range(n):
                    for b in range(a, n):
                        c = Mm[a, b] * (1.0 if a == b else 2.0)
                        if c == 0.0:
                            continue
                        g = int(prob.gram_index[a, b])
                        if m:
                            e.add_quad(m[0], g, c)
                        else:
                            e.add_lin(g, c)
            return e
        for a in range(n):
            for b in range(a, n):
                poly = M.entry_poly(a, b)
                if not poly:
                    continue
                w = 1.0 if a == b else 2.0
                g = int(prob.gram_index[a, b])
                if set(poly) == {()}:
                    e.add_lin(g, w * poly[()])
                    continue
                name = f"{theta}[{a},{b}]"
                if name in prob.index:
                    t = prob.index[name]
                else:
                    lo, hi = poly_interval(poly, prob)
                    t = self.scalar(name, "Theta", lo, hi)
                    d = self.poly_expr(poly)
                    con = QuadExpr()
                    con.add_lin(t, 1.0)
                    con.iadd(d, -1.0)
                    prob.add_constraint(con, "==", f"{theta} definition")
                    prob.definitions[t] = d
                e.add_quad(t, g, w)
        return e

    def constrain(self, lhs: QuadExpr, sense: str, rhs: QuadExpr | float, tag: str) -> None:
        e = lhs.copy()
        if isinstance(rhs, QuadExpr):
            e.iadd(rhs, -1.0)
        else:
            e.const -= float(rhs)
        if e.prune(1e-15).is_zero():
            return  # trivially satisfied after selector substitution
        self.prob.add_constraint(e, sense, tag)

    def interpolation(self, dm: DataMatrices, p: ClassParams, i: str, j: str, theta_B: bool) -> None:
        k = 1.0 / (2.0 * (1.0 - p.q))
        M = dm.A(i, j) + (dm.C(i, j).scale(1.0 / p.L) - dm.E(i, j).scale(2.0 * p.mu / p.L)).scale(k)
        e = self.f_expr(dm.a(i, j))
        e.iadd(self.trace(M))
        pair = "-".join(sorted((i, j)))
        Bm = dm.B(i, j)
        if theta_B and Bm.degree() > 0:
            e.iadd(self.trace(Bm, theta=f"Theta[{pair}]"), k * p.mu)
        else:
            e.iadd(self.trace(Bm), k * p.mu)
        self.constrain(e, "<=", 0.0, f"interpolation({i},{j})")

    def attach_basis(self, basis: SelectorBasis) -> None:
        self.prob.meta["basis"] = basis_to_dict(basis)
        self.prob.meta["f_index"] = list(self.f_index)


def basis_to_dict(b: SelectorBasis) -> dict:
    def enc(v: SymVec) -> list:
        return [[list(m), vec.tolist()] for m, vec in v.terms.items()]

    return {
        "gram_size": b.gram_size,
        "f_size": b.f_size,
        "labels": list(b.labels),
        "columns": list(b.column_names),
        "x": {k: enc(v) for k, v in b.x.items()},
        "g": {k: enc(v) for k, v in b.g.items()},
        "d": {k: enc(v) for k, v in b.d.items()},
        "f": {k: np.asarray(v).tolist() for k, v in b.f.items()},
    }


def basis_from_dict(d: dict) -> SelectorBasis:
    n = int(d["gram_size"])

    def dec(items: list) -> SymVec:
        return SymVec(n, {tuple(int(i) for i in m): np.array(v, dtype=float) for m, v in items})

    return SelectorBasis(
        gram_size=n,
        f_size=int(d["f_size"]),
        labels=list(d["labels"]),
        x={k: dec(v) for k, v in d["x"].items()},
        g={k: dec(v) for k, v in d["g"].items()},
        d={k: dec(v) for k, v in d["d"].items()},
        f={k: np.array(v, dtype=float) for k, v in d["f"].items()},
        column_names=list(d.get("columns", [])),
    )


def problem_basis(prob: QcqpProblem) -> SelectorBasis:
    return basis_from_dict(prob.meta["basis"])


# ---------------------------------------------------------------------------
# (D): worst next direction


def build_direction_pep(
    eta: int,
    params: ClassParams,
    c_prev: float,
    *,
    coupling: str = "<=",
    gram_cap: float | None = None,
    psd_mode: str = "lazy",
) -> QcqpProblem:
    """Direction-quality PEP: maximize ||d_k||^2 subject to ||g_k||^2 = 1.

    ``coupling`` is the sense of ``||d_{k-1}||^2 (<= or ==) c ||g_{k-1}||^2``.
    ``gram_cap`` is the heuristic upper box on ``||g_{k-1}||^2`` (the only
    unbounded direction of the feasible set); it defaults to ``8 / (q rho)``
    with ``rho`` the one-step rate of steepest descent along a direction of
    quality ``c_prev``. The same rate gives the valid lower box
    ``||g_{k-1}||^2 >= q / rho``, from ``||g||^2 >= 2 mu (f - f_*)``,
    ``f_k - f_* <= rho (f_{k-1} - f_*)`` and ``||g_k||^2 <= 2L (f_k - f_*)``.
    """
    eta = _check_eta(eta)
    if c_prev < 1.0:
        raise ValueError("c_prev must be >= 1")
    if coupling not in ("<=", "=="):
        raise ValueError("coupling must be '<=' or '=='")
    p = params
    q = p.q
    rho = asd_rate(q, epsilon_from_c(c_prev))
    g_lo = q / rho
    U = float(gram_cap) if gram_cap is not None else 8.0 / (q * rho)
    if U <= g_lo:
        raise ValueError(f"gram_cap {U} is below the valid lower bound {g_lo}")
    B = _Builder(f"direction(eta={eta},q={q:g},c={c_prev:g})", 4, ["-1", "0"], psd_mode)
    prob = B.prob
    # ||g_k||^2 = 1; x_{k-1} never enters (only differences do)
    B.gram_boxes(diag_ub=[U, U, 1.0, c_prev * U], diag_lb=[0.0, g_lo, 1.0, g_lo],
                 heuristic=[True, True, False, True])
    g_max = 1.0 / p.mu  # gamma <= <g,d>/(mu ||d||^2) <= 1/mu since ||d|| >= ||g||
    g_min = 1.0 / (p.L * c_prev)
    gamma = B.scalar("gamma[-1]", "gamma", g_min, g_max)
    blo, bhi = beta_box(eta, q)
    if eta == 0:
        blo = max(blo, 1.0 / U)
    beta = B.scalar("beta[-1]", "beta", blo, bhi)
    fmax = U * g_max + 1.0
    for k in B.f_index:
        B.set_box(k, -fmax, fmax, heuristic=True)

    b = SelectorBasis(4, 2, ["-1", "0"], column_names=["x[-1]", "g[-1]", "g[0]", "d[-1]"])
    b.x["-1"] = b.e(0)
    b.g["-1"] = b.e(1)
    b.g["0"] = b.e(2)
    b.d["-1"] = b.e(3)
    b.x["0"] = b.e(0) - b.e(3).scale(1.0, gamma)
    b.d["0"] = b.e(2) + b.e(3).scale(1.0, beta)
    b.f["-1"] = b.fe(0)
    b.f["0"] = b.fe(1)
    dm = DataMatrices(b)

    prob.objective = B.trace(dm.Ct_star("0"), theta="Theta")
    B.constrain(B.trace(dm.Dt("-1", "-1")), "==", B.trace(dm.C_star("-1")), "<g[-1],d[-1]> = ||g[-1]||^2")
    B.constrain(B.trace(dm.Dt("0", "-1")), "==", 0.0, "<g[0],d[-1]> = 0")
    B.constrain(B.trace(dm.A("-1", "0")), "==", 0.0, "<g[0],x[-1]-x[0]> = 0")
    lhs = B.trace(dm.C_star("-1")).copy()
    lhs_b = QuadExpr()
    for (gi, ci) in lhs.lin.items():
        lhs_b.add_quad(beta, gi, ci)
    B.constrain(lhs_b, "==", B.trace(dm.C_star("0") - dm.D("0", "-1").scale(eta)), "beta definition(-1)")
    rhs = B.trace(dm.C_star("-1"))
    rhs = QuadExpr().iadd(rhs, c_prev)
    B.constrain(B.trace(dm.Ct_star("-1")), coupling, rhs, "direction quality(-1)")
    for i, j in ordered_pairs(b.labels):
        B.interpolation(dm, p, i, j, theta_B=True)
    B.constrain(B.trace(dm.C_star("0")), "==", 1.0, "normalization ||g[0]||^2 = 1")

    prob.meta.update(family="direction", eta=eta, mu=p.mu, L=p.L, q=q, c=c_prev, coupling=coupling,
                     gram_cap=U, scalars={"beta[-1]": beta, "gamma[-1]": gamma})
    B.attach_basis(b)
    return prob


# ---------------------------------------------------------------------------
# N-step upper bounds


def _multi_basis_upper(N: int, exact: bool) -> SelectorBasis:
    n = 2 * N + 3
    labels = ["*"] + [str(i) for i in range(N + 1)]
    cols = ["d[0]"] + [f"g[{i}]" for i in range(N + 1)] + [f"x[{i}]" for i in range(N + 1)]
    b = SelectorBasis(n, N + 1, labels, column_names=cols)
    b.x["*"] = b.zero()
    b.g["*"] = b.zero()
    b.f["*"] = b.fe(None)
    for i in range(N + 1):
        b.g[str(i)] = b.e(i + 1)
        b.x[str(i)] = b.e(N + 2 + i)
        b.f[str(i)] = b.fe(i)
    b.d["0"] = b.e(1) if exact else b.e(0)
    return b


def _common_multi_constraints(B: _Builder, b: SelectorBasis, dm: DataMatrices, N: int, eta: int,
                              betas: dict[int, int] | None, fixed_betas: Sequence[float] | None) -> None:
    # orthogonality, line-search and descent identities
    for i in range(N):
        s, t = str(i), str(i + 1)
        B.constrain(B.trace(dm.Dt(t, s)), "==", 0.0, f"<g[{t}],d[{s}]> = 0")
        B.constrain(B.trace(dm.A(s, t)), "==", 0.0, f"<g[{t}],x[{s}]-x[{t}]> = 0")
        B.constrain(B.trace(dm.Dt(s, s)), "==", B.trace(dm.C_star(s)), f"<g[{s}],d[{s}]> = ||g[{s}]||^2")
    for i in range(1, N):
        s, r = str(i), str(i - 1)
        rhs = B.trace(dm.C_star(s) - dm.D(s, r).scale(eta))
        base = B.trace(dm.C_star(r))
        lhs = QuadExpr()
        if fixed_betas is not None:
            lhs.iadd(base, float(fixed_betas[i - 1]))
        else:
            for gi, ci in base.lin.items():
                lhs.add_quad(betas[i - 1], gi, ci)
        B.constrain(lhs, "==", rhs, f"beta definition({i - 1})")


def _chi_variables(B: _Builder, N: int, betas: dict[int, int]) -> dict[tuple[int, int], int]:
    """chi_{j,i} for i in [1:N-1], j in [0:i-1] with their recursions."""
    prob = B.prob
    chi: dict[tuple[int, int], int] = {}
    for i in range(1, N):
        bvar = betas[i - 1]
        bv = prob.variables[bvar]
        for j in range(i):
            if j == i - 1:
                lo, hi = bv.lb, bv.ub
            else:
                pv = prob.variables[chi[(j, i - 1)]]
                lo, hi = _imul((pv.lb, pv.ub), (bv.lb, bv.ub))
            k = B.scalar(f"chi[{j},{i}]", "chi", lo, hi)
            chi[(j, i)] = k
            e = QuadExpr()
            e.add_lin(k, 1.0)
            if j == i - 1:
                e.add_lin(bvar, -1.0)
                d = QuadExpr(lin={bvar: 1.0})
            else:
                e.add_quad(chi[(j, i - 1)], bvar, -1.0)
                d = QuadExpr(quad={tuple(sorted((chi[(j, i - 1)], bvar))): 1.0})
            prob.add_constraint(e, "==", f"chi recursion({j},{i})")
            prob.definitions[k] = d
    return chi


def _upper(eta: int, params: ClassParams, c: float | None, N: int, psd_mode: str) -> QcqpProblem:
    eta = _check_eta(eta)
    if N < 1:
        raise ValueError("N must be >= 1")
    exact = c is None
    p = params
    n = 2 * N + 3
    family = "exact" if exact else "lyapunov"
    name = f"{family}(eta={eta},q={p.q:g}" + ("" if exact else f",c={c:g}") + f",N={N})"
    B = _Builder(name, n, [str(i) for i in range(N + 1)], psd_mode)
    prob = B.prob
    # f_i <= f_k = 1 (descent), ||g_i||^2 <= 2L f_i, ||x_i||^2 <= 2 f_i / mu, ||d_k||^2 <= c ||g_k||^2
    gub = 2.0 * p.L
    xub = 2.0 / p.mu
    dub = gub * (1.0 if exact else c)
    B.gram_boxes([dub] + [gub] * (N + 1) + [xub] * (N + 1))
    for k in B.f_index:
        B.set_box(k, 0.0, 1.0)
    blo, bhi = beta_box(eta, p.q)
    betas = {i: B.scalar(f"beta[{i}]", "beta", blo, bhi) for i in range(N - 1)}
    chi = _chi_variables(B, N, betas)

    b = _multi_basis_upper(N, exact)
    for i in range(1, N):
        d = b.g[str(i)] + b.d["0"].scale(1.0, chi[(0, i)])
        for j in range(1, i):
            d = d + b.g[str(j)].scale(1.0, chi[(j, i)])
        b.d[str(i)] = d
    dm = DataMatrices(b)

    prob.objective = B.f_expr(dm.a("*", str(N)))
    for i, j in ordered_pairs(b.labels):
        B.interpolation(dm, p, i, j, theta_B=False)
    if not exact:
        B.constrain(B.trace(dm.Ct_star("0")), "<=", QuadExpr().iadd(B.trace(dm.C_star("0")), c),
                    "direction quality(0)")
    _common_multi_constraints(B, b, dm, N, eta, betas, None)
    B.constrain(B.f_expr(dm.a("*", "0")), "==", 1.0, "normalization f[0] - f[*] = 1")
    prob.meta.update(family=family, eta=eta, mu=p.mu, L=p.L, q=p.q, c=c, N=N,
                     scalars={**{f"beta[{i}]": v for i, v in betas.items()},
                              **{f"chi[{j},{i}]": v for (j, i), v in chi.items()}})
    B.attach_basis(b)
    return prob


def build_lyapunov_upper(eta: int, params: ClassParams, c: float, N: int, *, psd_mode: str = "lazy") -> QcqpProblem:
    """Upper bound on f_{k+N}/f_k for iterates started from any (x_k, d_k) of quality c."""
    if c < 1.0:
        raise ValueError("c must be >= 1")
    return _upper(eta, params, float(c), N, psd_mode)


def build_exact_upper(eta: int, params: ClassParams, N: int, *, psd_mode: str = "lazy") -> QcqpProblem:
    """Upper bound on f_N/f_0 for the method started with d_0 = g_0."""
    return _upper(eta, params, None, N, psd_mode)


# ---------------------------------------------------------------------------
# lower bound with frozen CG parameters


def fixed_chi(betas: Sequence[float], N: int) -> dict[tuple[int, int], float]:
    chi: dict[tuple[int, int], float] = {}
    for i in range(1, N):
        for j in range(i):
            chi[(j, i)] = float(betas[i - 1]) if j == i - 1 else chi[(j, i - 1)] * float(betas[i - 1])
    return chi


def build_lower_fixed_beta(
    eta: int,
    params: ClassParams,
    c_or_exact: float | None,
    N: int,
    betas: Sequence[float],
    *,
    psd_mode: str = "lazy",
) -> QcqpProblem:
    """Exact-line-search PEP with CG parameters frozen to ``betas``.

    ``c_or_exact`` is the initial direction quality, or ``None`` for the
    start ``d_0 = g_0``.
    """
    eta = _check_eta(eta)
    betas = [float(v) for v in betas]
    if len(betas) != N - 1:
        raise ValueError(f"need {N - 1} CG parameters, got {len(betas)}")
    if not all(math.isfinite(v) for v in betas):
        raise ValueError("CG parameters must be finite")
    exact = c_or_exact is None
    p = params
    n = N + 3
    family = "lower-exact" if exact else "lower"
    B = _Builder(f"{family}(eta={eta},q={p.q:g},N={N})", n, [str(i) for i in range(N + 1)], psd_mode)
    prob = B.prob
    c = 1.0 if exact else float(c_or_exact)
    B.gram_boxes([2.0 / p.mu] + [2.0 * p.L] * (N + 1) + [2.0 * p.L * c])
    for k in B.f_index:
        B.set_box(k, 0.0, 1.0)
    gam = {i: B.scalar(f"gamma[{i}]", "gamma", 0.0, 1.0 / p.mu) for i in range(N)}
    chi_val = fixed_chi(betas, N)
    chi: dict[tuple[int, int], int] = {}
    for (j, i), v in chi_val.items():
        k = B.scalar(f"chi[{j},{i}]", "chi", v, v)
        chi[(j, i)] = k
        e = QuadExpr(const=-v, lin={k: 1.0})
        prob.add_constraint(e, "==", f"chi recursion({j},{i})")
        prob.definitions[k] = QuadExpr(const=v)
    alpha: dict[tuple[int, int], int] = {}
    for i in range(1, N + 1):
        for j in range(i):
            d = QuadExpr(lin={gam[j]: 1.0})
            for ell in range(j + 1, i):
                d.add_lin(gam[ell], chi_val[(j, ell)])
            lo, hi = 0.0, 0.0
            for v, cf in d.lin.items():
                r = _imul((prob.variables[v].lb, prob.variables[v].ub), (cf, cf))
                lo, hi = lo + r[0], hi + r[1]
            k = B.scalar(f"alpha[{i},{j}]", "alpha", lo, hi)
            alpha[(i, j)] = k
            e = QuadExpr(lin={k: 1.0}).iadd(d, -1.0)
            prob.add_constraint(e, "==", f"alpha recursion({i},{j})")
            prob.definitions[k] = d

    labels = ["*"] + [str(i) for i in range(N + 1)]
    cols = ["x[0]"] + [f"g[{i}]" for i in range(N + 1)] + ["d[0]"]
    b = SelectorBasis(n, N + 1, labels, column_names=cols)
    b.x["*"] = b.zero()
    b.g["*"] = b.zero()
    b.f["*"] = b.fe(None)
    for i in range(N + 1):
        b.g[str(i)] = b.e(i + 1)
        b.f[str(i)] = b.fe(i)
    b.d["0"] = b.e(1) if exact else b.e(N + 2)
    b.x["0"] = b.e(0)
    for i in range(1, N):
        d = b.g[str(i)] + b.d["0"].scale(chi_val[(0, i)])
        for j in range(1, i):
            d = d + b.g[str(j)].scale(chi_val[(j, i)])
        b.d[str(i)] = d
    for i in range(1, N + 1):
        x = b.x["0"] - b.d["0"].scale(1.0, alpha[(i, 0)])
        for j in range(1, i):
            x = x - b.g[str(j)].scale(1.0, alpha[(i, j)])
        b.x[str(i)] = x
    dm = DataMatrices(b)

    prob.objective = B.f_expr(dm.a("*", str(N)))
    for i, j in ordered_pairs(labels):
        B.interpolation(dm, p, i, j, theta_B=True)
    if not exact:
        B.constrain(B.trace(dm.Ct_star("0")), "<=", QuadExpr().iadd(B.trace(dm.C_star("0")), c),
                    "direction quality(0)")
    _common_multi_constraints(B, b, dm, N, eta, None, betas)
    B.constrain(B.f_expr(dm.a("*", "0")), "==", 1.0, "normalization f[0] - f[*] = 1")
    prob.meta.update(family=family, eta=eta, mu=p.mu, L=p.L, q=p.q, c=None if exact else c, N=N,
                     betas=betas,
                     scalars={**{f"gamma[{i}]": v for i, v in gam.items()},
                              **{f"alpha[{i},{j}]": v for (i, j), v in alpha.items()}})
    B.attach_basis(b)
    return prob
