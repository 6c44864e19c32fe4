"""Linear relaxation of a Gram QCQP: McCormick envelopes, RLT products and
lazily separated PSD cuts.

Every bilinear product ``u v`` is lifted to a column ``w`` bounded by the
four McCormick inequalities of the node box. Method scalars ``s`` that
multiply Gram entries get a full lifted matrix ``W^s ~ s G`` on the rows of
G that the problem uses, tied to G by

* ``(s - l) G >= 0`` and ``(u - s) G >= 0`` (PSD order, separated lazily),
* ``W^t = c0 G + sum_k c_k W^{s_k}`` for linear definitions ``t = c0 + sum_k c_k s_k``,
* ``(u - s)(s - l) G >= 0`` and ``(s - m)^2 G >= 0`` for ``t = s^2``,
* the four bound-factor products for ``t = s r``,
* ``s`` times every linear equality over G, and the bound factors times every
  linear inequality over G.

The plain cut ``tr(G y y^T) >= 0`` is the special case without scalar. All
cut families are valid for every point with ``G >= 0`` and ``w = u v``, so
the LP value bounds the QCQP (maximization) on the node box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..pep.qcqp import QcqpProblem, QuadExpr

PSD_TOL = 1e-6
LP_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9, "presolve": True}


class RelaxationFailed(RuntimeError):
    """The LP solver gave no usable answer on the first round."""


class RelaxationInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class Cut:
    """Matrix inequality ``sum_k coef_k(box) M_k >= 0`` tested along ``u``.

    ``kind`` is one of ``"G"``, ``"lo"``, ``"hi"`` (scalar ``s``), ``"sq_in"``,
    ``"sq_tan"`` (``t = s^2``, tangent point ``m``), ``"bl0".."bl3"``
    (``t = s r``) and ``"kron"``: ``[[G, W^s], [W^s, W^t]] >= 0`` for
    ``t = s^2``, tested along ``u = (a, b)`` of twice the size.
    """

    kind: str
    u: tuple[float, ...]
    t: int = -1
    s: int = -1
    r: int = -1
    m: float = 0.0

    def terms(self, lb: np.ndarray, ub: np.ndarray) -> list[tuple[int | None, float]] | None:
        """``[(matrix, coef)]`` with ``None`` for G and a scalar index for ``W^s``."""
        k = self.kind
        if k == "G":
            return [(None, 1.0)]
        if k in ("lo", "hi"):
            l, u = lb[self.s], ub[self.s]
            if not (np.isfinite(l) and np.isfinite(u)):
                return None
            return [(self.s, 1.0), (None, -l)] if k == "lo" else [(None, u), (self.s, -1.0)]
        if k == "sq_in":
            l, u = lb[self.s], ub[self.s]
            if not (np.isfinite(l) and np.isfinite(u)):
                return None
            return [(self.t, -1.0), (self.s, l + u), (None, -l * u)]
        if k == "kron":
            return [(None, 1.0), (self.s, 1.0), (self.t, 1.0)]
        if k == "sq_tan":
            return [(self.t, 1.0), (self.s, -2.0 * self.m), (None, self.m * self.m)]
        if k.startswith("bl"):
            ls, us, lr, ur = lb[self.s], ub[self.s], lb[self.r], ub[self.r]
            if not all(np.isfinite(v) for v in (ls, us, lr, ur)):
                return None
            # sign * (s - ps)(r - pr) G >= 0 for the four box corners
            ps, pr, sign = [(ls, lr, 1.0), (us, ur, 1.0), (ls, ur, -1.0), (us, lr, -1.0)][int(k[2])]
            return [(self.t, sign), (self.s, -sign * pr), (self.r, -sign * ps), (None, sign * ps * pr)]
        raise ValueError(k)


def separate_psd_cut(G: np.ndarray, tol: float = PSD_TOL) -> Cut | None:
    """Eigenvector cut ``tr(G u u^T) >= 0`` when ``lambda_min(G) < -tol``."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("G must be square")
    if not np.all(np.isfinite(G)):
        raise np.linalg.LinAlgError("non-finite matrix")
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    if w[0] >= -tol:
        return None
    u = V[:, 0]
    u = u * np.sign(u[np.argmax(np.abs(u))])
    return Cut("G", tuple(float(x) for x in u))


@dataclass
class RelaxResult:
    bound: float
    x: np.ndarray  # LP solution
    z: np.ndarray  # its projection on the problem variables
    rounds: int
    new_cuts: list[Cut] = field(default_factory=list)
    active: list[Cut] = field(default_factory=list)
    min_eig: float = 0.0
    status: str = "optimal"


class Relaxation:
    def __init__(self, prob: QcqpProblem):
        self.prob = prob
        kinds = prob.kinds()
        nv = prob.n_vars
        cons = prob.active_constraints()
        self.cons = cons
        exprs = [c.expr for c in cons] + [prob.objective]
        # rows of G that matter
        g_of = {}
        n = prob.gram_size
        for a in range(n):
            for b in range(a, n):
                g_of[int(prob.gram_index[a, b])] = (a, b)
        used = set()
        for e in exprs:
            for i in e.variables():
                if i in g_of:
                    used.update(g_of[i])
        self.rows = sorted(used)
        self.g_of = g_of
        # base LP columns: everything but H (unless H enters constraints)
        in_cons = set()
        for e in exprs:
            in_cons |= e.variables()
        self.base = [i for i in range(nv) if kinds[i] != "H" or i in in_cons]
        self.col = {i: k for k, i in enumerate(self.base)}
        self.pairs: dict[tuple[int, int], int] = {}
        for e in exprs:
            for (i, j) in e.quad:
                self._pair(i, j)
        # scalars multiplying Gram entries get a full lifted matrix
        is_g = kinds == "G"
        mscal = set()
        for (i, j) in list(self.pairs):
            if is_g[i] != is_g[j]:
                mscal.add(j if is_g[i] else i)
        defs = prob.definitions
        self.sq_defs: list[tuple[int, int]] = []
        self.bl_defs: list[tuple[int, int, int]] = []
        self.lin_defs: list[tuple[int, QuadExpr]] = []
        frontier = list(mscal)
        while frontier:
            t = frontier.pop()
            d = defs.get(t)
            if d is None:
                continue
            for s in d.variables():
                if s not in mscal and not is_g[s]:
                    mscal.add(s)
                    frontier.append(s)
        for t in sorted(mscal):
            d = defs.get(t)
            if d is None:
                continue
            if not d.quad and d.lin:
                self.lin_defs.append((t, d))
            elif len(d.quad) == 1 and not d.lin and d.const == 0.0:
                (i, j), c = next(iter(d.quad.items()))
                if c == 1.0:
                    if i == j:
                        self.sq_defs.append((t, i))
                    else:
                        self.bl_defs.append((t, i, j))
        self.mscal = sorted(mscal)
        self.W: dict[int, dict[tuple[int, int], int]] = {}
        for s in self.mscal:
            self.W[s] = {}
            for ai, a in enumerate(self.rows):
                for b in self.rows[ai:]:
                    g = int(prob.gram_index[a, b])
                    self.W[s][(a, b)] = self._pair(s, g)
        self.gcol = {(a, b): self.col[int(prob.gram_index[a, b])]
                     for ai, a in enumerate(self.rows) for b in self.rows[ai:]}
        self.ncol = len(self.base) + len(self.pairs)
        self.pair_list = sorted(self.pairs.items(), key=lambda kv: kv[1])
        self._static()
        self._index_arrays()

    # ------------------------------------------------------------------
    def _pair(self, i: int, j: int) -> int:
        key = (i, j) if i <= j else (j, i)
        if key not in self.pairs:
            self.pairs[key] = len(self.base) + len(self.pairs)
        return self.pairs[key]

    def _lin_row(self, e: QuadExpr) -> tuple[dict[int, float], float]:
        row: dict[int, float] = {}
        for i, c in e.lin.items():
            row[self.col[i]] = row.get(self.col[i], 0.0) + c
        for (i, j), c in e.quad.items():
            k = self.pairs[(i, j)]
            row[k] = row.get(k, 0.0) + c
        return row, e.const

    def _static(self) -> None:
        """Box-independent rows (linearized constraints, RLT equalities)."""
        prob = self.prob
        self.eq_rows: list[tuple[dict[int, float], float]] = []
        self.ub_rows: list[tuple[dict[int, float], float]] = []  # row . x <= rhs
        for c in self.cons:
            row, const = self._lin_row(c.expr)
            if c.sense == "==":
                self.eq_rows.append((row, -const))
            elif c.sense == "<=":
                self.ub_rows.append((row, -const))
            else:
                self.ub_rows.append(({k: -v for k, v in row.items()}, const))
        self.obj_row, self.obj_const = self._lin_row(prob.objective)
        # W^t for linear definitions
        for t, d in self.lin_defs:
            for key, wt in self.W[t].items():
                row = {wt: 1.0}
                g = self.gcol[key]
                row[g] = row.get(g, 0.0) - d.const
                for s, c in d.lin.items():
                    if s in self.W:
                        row[self.W[s][key]] = row.get(self.W[s][key], 0.0) - c
                    else:
                        row = None
                        break
                if row is not None:
                    self.eq_rows.append((row, 0.0))
        # s times linear equalities over G
        self.g_lin_eq: list[tuple[dict[tuple[int, int], float], float]] = []
        self.g_lin_le: list[tuple[dict[tuple[int, int], float], float]] = []
        for c in self.cons:
            e = c.expr
            if e.quad or not e.lin or not all(i in self.g_of for i in e.lin):
                continue
            gl = {}
            for i, v in e.lin.items():
                a, b = self.g_of[i]
                gl[(a, b)] = v
            if c.sense == "==":
                self.g_lin_eq.append((gl, e.const))
            else:
                sgn = 1.0 if c.sense == "<=" else -1.0
                self.g_lin_le.append(({k: sgn * v for k, v in gl.items()}, sgn * e.const))
        for s in self.mscal:
            for gl, const in self.g_lin_eq:
                row = {}
                for key, v in gl.items():
                    k = self.W[s][key]
                    row[k] = row.get(k, 0.0) + v
                if const:
                    row[self.col[s]] = row.get(self.col[s], 0.0) + const
                self.eq_rows.append((row, 0.0))
        self._rlt_scaled_equalities()

    def _rlt_scaled_equalities(self) -> None:
        """``r`` times equalities with ``s G`` terms, when ``r s`` has a lifted matrix."""
        prod: dict[tuple[int, int], int] = {}
        for t, s in self.sq_defs:
            prod[(s, s)] = t
        for t, s, r in self.bl_defs:
            prod[(s, r)] = prod[(r, s)] = t
        for c in self.cons:
            e = c.expr
            if c.sense != "==" or not e.quad:
                continue
            terms = []  # (scalar or None, gram key, coef)
            ok = True
            for i, v in e.lin.items():
                if i not in self.g_of:
                    ok = False
                    break
                terms.append((None, self.g_of[i], v))
            for (i, j), v in e.quad.items():
                s, g = (i, j) if j in self.g_of else (j, i)
                if g not in self.g_of or s in self.g_of:
                    ok = False
                    break
                terms.append((s, self.g_of[g], v))
            if not ok:
                continue
            for r in self.mscal:
                row: dict[int, float] = {}
                for s, key, v in terms:
                    t = r if s is None else prod.get((r, s))
                    if t is None or t not in self.W:
                        row = None
                        break
                    _acc(row, self.W[t][key], v)
                if row is None:
                    continue
                if e.const:
                    _acc(row, self.col[r], e.const)
                self.eq_rows.append((row, 0.0))

    # ------------------------------------------------------------------
    def _index_arrays(self) -> None:
        R = self.rows
        m = len(R)
        ia, ib = np.triu_indices(m)
        self.tri = (ia, ib)
        self.tri_w = np.where(ia == ib, 1.0, 2.0)
        keys = [(R[a], R[b]) for a, b in zip(ia, ib)]
        self.mat_cols: dict[int | None, np.ndarray] = {None: np.array([self.gcol[k] for k in keys], dtype=int)}
        for s in self.mscal:
            self.mat_cols[s] = np.array([self.W[s][k] for k in keys], dtype=int)
        bil = [(i, j, w) for (i, j), w in self.pair_list if i != j]
        sq = [(i, w) for (i, j), w in self.pair_list if i == j]
        self.bil_i = np.array([i for i, _, _ in bil], dtype=int)
        self.bil_j = np.array([j for _, j, _ in bil], dtype=int)
        self.bil_ci = np.array([self.col[i] for i, _, _ in bil], dtype=int)
        self.bil_cj = np.array([self.col[j] for _, j, _ in bil], dtype=int)
        self.bil_w = np.array([w for _, _, w in bil], dtype=int)
        self.sq_i = np.array([i for i, _ in sq], dtype=int)
        self.sq_ci = np.array([self.col[i] for i, _ in sq], dtype=int)
        self.sq_w = np.array([w for _, w in sq], dtype=int)
        self.A_eq, self.b_eq = _vstack([_assemble(self.eq_rows)], self.ncol)
        self.ub_block = _assemble(self.ub_rows)
        # bound factor (s - l_s) or (u_s - s) times each linear inequality over G
        tr, tc, tv, tg, ts, tk = [], [], [], [], [], []  # row, col, coef, "is G" flag, scalar, const
        consts, scal = [], []
        k = 0
        for s in self.mscal:
            for gl, const in self.g_lin_le:
                for key, v in gl.items():
                    tr += [k, k]
                    tc += [self.W[s][key], self.gcol[key]]
                    tv += [v, v]
                    tg += [False, True]
                consts.append(const)
                scal.append(s)
                k += 1
        self.bf_row = np.array(tr, dtype=int)
        self.bf_col = np.array(tc, dtype=int)
        self.bf_val = np.array(tv, dtype=float)
        self.bf_isg = np.array(tg, dtype=bool)
        self.bf_const = np.array(consts, dtype=float)
        self.bf_scal = np.array(scal, dtype=int)
        self.bf_scol = np.array([self.col[s] for s in scal], dtype=int)
        self._uu: dict[tuple[float, ...], np.ndarray] = {}

    def column_bounds(self, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
        out = np.empty((self.ncol, 2))
        out[: len(self.base), 0] = lb[self.base]
        out[: len(self.base), 1] = ub[self.base]
        for (i, j), w in self.pair_list:
            out[w] = _isq(lb[i], ub[i]) if i == j else _imul(lb[i], ub[i], lb[j], ub[j])
        return out

    def box_rows(self, lb: np.ndarray, ub: np.ndarray, tangents: dict[int, list[float]] | None = None,
                 static: bool = False):
        """McCormick, square envelopes and bound-factor RLT rows for a box, as (A, b) with A x <= b.

        ``static`` prepends the box-independent inequalities.
        """
        blocks = [self.ub_block] if static else []
        li, ui = lb[self.bil_i], ub[self.bil_i]
        lj, uj = lb[self.bil_j], ub[self.bil_j]
        with np.errstate(invalid="ignore", over="ignore"):
            prods = (li * lj, ui * uj, li * uj, ui * lj)
        # w >= a x + b y - a b style rows: (sign of w, coef on x, coef on y, rhs)
        for sw, ax, ay, rhs, ok in (
            (-1.0, lj, li, prods[0], (li, lj)),
            (-1.0, uj, ui, prods[1], (ui, uj)),
            (1.0, -uj, -li, -prods[2], (li, uj)),
            (1.0, -lj, -ui, -prods[3], (ui, lj)),
        ):
            k = np.flatnonzero(np.isfinite(ok[0]) & np.isfinite(ok[1]))
            if k.size == 0:
                continue
            blocks.append(_rows3(self.bil_w[k], sw, self.bil_ci[k], ax[k], self.bil_cj[k], ay[k], rhs[k]))
        # squares: secant above, tangents below
        if self.sq_i.size:
            l, u = lb[self.sq_i], ub[self.sq_i]
            fin = np.isfinite(l) & np.isfinite(u)
            k = np.flatnonzero(fin)
            if k.size:
                blocks.append(_rows2(self.sq_w[k], 1.0, self.sq_ci[k], -(l[k] + u[k]), -l[k] * u[k]))
            ws, cs, ms = [], [], []
            for idx in range(self.sq_i.size):
                pts = [v for v in (l[idx], u[idx]) if np.isfinite(v)]
                if fin[idx]:
                    pts.append(0.5 * (l[idx] + u[idx]))
                pts += (tangents or {}).get(int(self.sq_w[idx]), [])
                for mpt in pts:
                    ws.append(self.sq_w[idx])
                    cs.append(self.sq_ci[idx])
                    ms.append(mpt)
            if ws:
                ms = np.array(ms)
                blocks.append(_rows2(np.array(ws), -1.0, np.array(cs), 2.0 * ms, ms * ms))
        # bound factors times linear inequalities over G:
        # (s - l) (g.G + c) <= 0 and (u - s) (g.G + c) <= 0
        if self.bf_const.size:
            nb = self.bf_const.size
            for side in (0, 1):
                end = (lb if side == 0 else ub)[self.bf_scal]
                ok = np.isfinite(end)
                if not ok.any():
                    continue
                sgn = 1.0 if side == 0 else -1.0
                e = np.where(ok, end, 0.0)
                vals = np.where(self.bf_isg, -e[self.bf_row] * self.bf_val, self.bf_val) * sgn
                keep = ok[self.bf_row]
                rows = np.concatenate([self.bf_row[keep], np.flatnonzero(ok)])
                cols = np.concatenate([self.bf_col[keep], self.bf_scol[ok]])
                v = np.concatenate([vals[keep], sgn * self.bf_const[ok]])
                rhs = sgn * e * self.bf_const
                # compact the row numbering to the kept rows
                idx = -np.ones(nb, dtype=int)
                idx[ok] = np.arange(int(ok.sum()))
                blocks.append((idx[rows], cols, v, rhs[ok]))
        return _vstack(blocks, self.ncol)

    def _uu_of(self, u: tuple[float, ...]) -> np.ndarray:
        v = self._uu.get(u)
        if v is None:
            a = np.asarray(u)
            v = a[self.tri[0]] * a[self.tri[1]] * self.tri_w
            self._uu[u] = v
        return v

    def cut_rows(self, cuts: list[Cut], lb: np.ndarray, ub: np.ndarray):
        """Rows ``-sum_k coef_k tr(M_k u u^T) <= 0``; returns (A, b, kept cut indices)."""
        r_idx, c_idx, vals, kept = [], [], [], []
        r = 0
        for ci, cut in enumerate(cuts):
            terms = cut.terms(lb, ub)
            if terms is None:
                continue
            if cut.kind == "kron":
                h = len(cut.u) // 2
                a, b = np.asarray(cut.u[:h]), np.asarray(cut.u[h:])
                ia, ib = self.tri
                outer = {None: self._uu_of(cut.u[:h]), cut.t: self._uu_of(cut.u[h:]),
                         cut.s: np.where(ia == ib, 2.0 * a[ia] * b[ib], 2.0 * (a[ia] * b[ib] + a[ib] * b[ia]))}
            else:
                uu = self._uu_of(cut.u)
                outer = None
            for mat, coef in terms:
                if outer is not None:
                    uu = outer[mat]
                if coef == 0.0:
                    continue
                cols = self.mat_cols[mat]
                c_idx.append(cols)
                vals.append(-coef * uu)
                r_idx.append(np.full(cols.size, r))
            kept.append(ci)
            r += 1
        if r == 0:
            return None, None, kept
        A, b = _vstack([(np.concatenate(r_idx), np.concatenate(c_idx), np.concatenate(vals), np.zeros(r))],
                       self.ncol)
        return A, b, kept

    def cut_row(self, cut: Cut, lb: np.ndarray, ub: np.ndarray) -> dict[int, float] | None:
        A, _, kept = self.cut_rows([cut], lb, ub)
        if A is None:
            return None
        A = A.tocoo()
        row: dict[int, float] = {}
        for k, v in zip(A.col, A.data):
            _acc(row, int(k), -float(v))
        return row

    # ------------------------------------------------------------------
    def matrices(self, x: np.ndarray) -> dict[int | None, np.ndarray]:
        m = len(self.rows)
        ia, ib = self.tri
        out = {}
        for key, cols in self.mat_cols.items():
            M = np.empty((m, m))
            M[ia, ib] = x[cols]
            M[ib, ia] = x[cols]
            out[key] = M
        return out

    def separate(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray, tol: float = PSD_TOL,
                 per_family: int = 3) -> tuple[list[Cut], float]:
        """Violated cuts at the LP point ``x`` and the smallest eigenvalue of G."""
        mats = self.matrices(x)
        G = mats[None]
        scale = max(1.0, float(np.abs(G).max()))
        fams: list[tuple[str, dict]] = [("G", {})]
        for s in self.mscal:
            fams += [("lo", {"s": s}), ("hi", {"s": s})]
        for t, s in self.sq_defs:
            fams += [("sq_in", {"t": t, "s": s}), ("sq_tan", {"t": t, "s": s, "m": float(x[self.col[s]])}),
                     ("kron", {"t": t, "s": s})]
        for t, s, r in self.bl_defs:
            fams += [(f"bl{k}", {"t": t, "s": s, "r": r}) for k in range(4)]
        cuts: list[Cut] = []
        min_eig = 0.0
        for kind, kw in fams:
            proto = Cut(kind, (), **kw)
            terms = proto.terms(lb, ub)
            if terms is None:
                continue
            if kind == "kron":
                M = np.block([[mats[None], mats[kw["s"]]], [mats[kw["s"]], mats[kw["t"]]]])
            else:
                M = sum(coef * mats[mat] for mat, coef in terms)
            w, V = np.linalg.eigh(M)
            if kind == "G":
                min_eig = float(w[0])
            thr = -tol * max(scale, float(np.abs(M).max()))
            for k in range(min(per_family, len(w))):
                if w[k] >= thr:
                    break
                u = V[:, k]
                u = u * np.sign(u[np.argmax(np.abs(u))])
                cuts.append(Cut(kind, tuple(float(v) for v in u), **kw))
        return cuts, min_eig

    def square_tangents(self, x: np.ndarray, tol: float = 1e-9) -> list[tuple[int, float]]:
        out = []
        for i, ci, w in zip(self.sq_i, self.sq_ci, self.sq_w):
            v = x[ci]
            if x[w] < v * v - tol * max(1.0, v * v):
                out.append((int(w), float(v)))
        return out

    # ------------------------------------------------------------------
    def solve_lp(self, lb: np.ndarray, ub: np.ndarray, cuts: list[Cut], tangents: dict[int, list[float]]):
        A_box, b_box = self.box_rows(lb, ub, tangents, static=True)
        A_c, b_c, kept = self.cut_rows(cuts, lb, ub)
        if A_c is not None:
            A_ub, b_ub = sp.vstack([A_box, A_c], format="csr"), np.concatenate([b_box, b_c])
        else:
            A_ub, b_ub = A_box, b_box
        cobj = np.zeros(self.ncol)
        for k, v in self.obj_row.items():
            cobj[k] -= v
        bnds = self.column_bounds(lb, ub)
        for method, extra in (("highs", {}), ("highs-ds", {"presolve": False}), ("highs-ipm", {})):
            res = linprog(cobj, A_ub=A_ub, b_ub=b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                          bounds=bnds, method=method, options={**LP_OPTIONS, **extra})
            if res.status in (0, 2):
                break
        res.cut_matrix = A_c
        res.cut_kept = kept
        return res

    def project(self, x: np.ndarray) -> np.ndarray:
        z = np.zeros(self.prob.n_vars)
        z[self.base] = x[: len(self.base)]
        return z

    def evaluate(self, lb: np.ndarray, ub: np.ndarray, cuts: list[Cut] | None = None, *, max_rounds: int = 150,
                 stall_rounds: int = 20, stall_tol: float = 1e-7, min_rounds: int = 30, tol: float = PSD_TOL,
                 tangents: dict[int, list[float]] | None = None, max_age: int = 5) -> RelaxResult:
        """Cut loop on a box: LP, separate, repeat until PSD, stalled or capped.

        Cuts slack for ``max_age`` consecutive rounds leave the working set.
        """
        cuts = list(cuts or [])
        age = [0] * len(cuts)
        tangents = {k: list(v) for k, v in (tangents or {}).items()}
        new: list[Cut] = []
        history: list[float] = []
        eigs: list[float] = []
        rounds = 0
        res = None
        min_eig = 0.0
        while True:
            rounds += 1
            trial = self.solve_lp(lb, ub, cuts, tangents)
            if trial.status == 2:
                raise RelaxationInfeasible(trial.message)
            if trial.status != 0:
                if res is None:
                    raise RelaxationFailed(trial.message)
                # keep the last solved round (its bound is valid)
                cuts = solved_cuts
                status = "lp-failed"
                break
            res, solved_cuts = trial, cuts
            val = -res.fun + self.obj_const
            history.append(val)
            x = res.x
            active = self._active_mask(res, cuts, x)
            found, min_eig = self.separate(x, lb, ub, tol)
            tans = self.square_tangents(x)
            for w, m in tans:
                tangents.setdefault(w, []).append(m)
            if not found and not tans:
                status = "psd"
                break
            age = [0 if a else g + 1 for a, g in zip(active, age)]
            keep = [i for i, g in enumerate(age) if g <= max_age]
            cuts = [cuts[i] for i in keep] + found
            age = [age[i] for i in keep] + [0] * len(found)
            new += found
            eigs.append(min_eig)
            if rounds >= max_rounds:
                status = "rounds"
                break
            if rounds >= min_rounds and len(history) > stall_rounds:
                ref = history[-1 - stall_rounds]
                eig_ref = eigs[-1 - stall_rounds]
                if ref - val <= stall_tol * max(1.0, abs(val)) and min_eig <= eig_ref * 0.5:
                    status = "stall"
                    break
        x = res.x
        mask = self._active_mask(res, solved_cuts, x)
        act = [c for c, a in zip(solved_cuts, mask) if a]
        return RelaxResult(history[-1], x, self.project(x), rounds, new, act, min_eig, status)

    def _active_mask(self, res, cuts: list[Cut], x: np.ndarray, rtol: float = 1e-7) -> list[bool]:
        mask = [False] * len(cuts)
        if res.cut_matrix is None:
            return mask
        scale = max(1.0, float(np.abs(x).max()))
        slack = -(res.cut_matrix @ x)
        for r, ci in enumerate(res.cut_kept):
            mask[ci] = slack[r] <= rtol * scale
        return mask

    # ------------------------------------------------------------------
    def lift_point(self, z: np.ndarray) -> np.ndarray:
        """LP vector of a problem point with every product set exactly."""
        x = np.zeros(self.ncol)
        x[: len(self.base)] = z[self.base]
        for (i, j), w in self.pair_list:
            x[w] = z[i] * z[j]
        return x

    def row_residuals(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray, cuts: list[Cut] = ()) -> float:
        """Largest violation of the box rows and cuts at ``x`` (<= 0 means satisfied)."""
        worst = -math.inf
        A, b = self.box_rows(lb, ub)
        if A is not None:
            worst = max(worst, float(np.max(A @ x - b)))
        A, b, _ = self.cut_rows(list(cuts), lb, ub)
        if A is not None:
            worst = max(worst, float(np.max(A @ x - b)))
        return worst


def _rows2(cw, sw, cx, ax, rhs):
    """Rows ``sw * x[cw] + ax * x[cx] <= rhs``."""
    n = cw.size
    r = np.arange(n)
    return (np.concatenate([r, r]), np.concatenate([cw, cx]), np.concatenate([np.full(n, sw), ax]),
            np.asarray(rhs, dtype=float))


def _rows3(cw, sw, ca, aa, cb, ab, rhs):
    n = cw.size
    r = np.arange(n)
    return (np.concatenate([r, r, r]), np.concatenate([cw, ca, cb]),
            np.concatenate([np.full(n, sw), aa, ab]), np.asarray(rhs, dtype=float))


def _vstack(blocks, ncol: int):
    """One CSR matrix from ``(row, col, val, rhs)`` blocks."""
    rs, cs, vs, bs = [], [], [], []
    off = 0
    for blk in blocks:
        if blk is None:
            continue
        r, c, v, b = blk
        rs.append(r + off)
        cs.append(c)
        vs.append(v)
        bs.append(b)
        off += b.size
    if off == 0:
        return None, None
    A = sp.csr_matrix((np.concatenate(vs), (np.concatenate(rs), np.concatenate(cs))), shape=(off, ncol))
    return A, np.concatenate(bs)


def _acc(row: dict[int, float], k: int, v: float) -> None:
    row[k] = row.get(k, 0.0) + v


def _fin(v: float) -> float | None:
    return float(v) if np.isfinite(v) else None


def _imul(a: float, b: float, c: float, d: float) -> tuple[float, float]:
    ps = [0.0 if (x == 0.0 or y == 0.0) else x * y for x in (a, b) for y in (c, d)]
    return min(ps), max(ps)


def _isq(a: float, b: float) -> tuple[float, float]:
    if a >= 0:
        return a * a, b * b
    if b <= 0:
        return b * b, a * a
    return 0.0, max(a * a, b * b)


def _assemble(rows: list[tuple[dict[int, float], float]], ncol: int = 0):
    """Dict rows as a block ``(row, col, val, rhs)`` of numpy arrays."""
    if not rows:
        return None
    r_idx, c_idx, vals = [], [], []
    b = np.empty(len(rows))
    for r, (row, rhs) in enumerate(rows):
        for k, v in row.items():
            r_idx.append(r)
            c_idx.append(k)
            vals.append(v)
        b[r] = rhs
    return (np.array(r_idx, dtype=int), np.array(c_idx, dtype=int), np.array(vals, dtype=float), b)


def seed_cuts(rel: Relaxation, z: np.ndarray, rng: np.random.Generator | None = None, n_random: int = 0,
              rtol: float = 1e-7) -> list[Cut]:
    """Cuts supporting the PSD cone at a feasible point, plus random unit cuts.

    For ``u`` in the null space of ``G(z)`` the cut ``tr(G u u^T) >= 0`` is
    tight at ``z``; sums and differences of null vectors span the face. The
    same vectors seed the bound-factor families of every lifted scalar.
    """
    R = rel.rows
    G = rel.prob.gram_matrix(z)[np.ix_(R, R)]
    w, V = np.linalg.eigh(G)
    null = V[:, w <= rtol * max(1.0, float(np.abs(w).max()))]
    vecs = [null[:, i] for i in range(null.shape[1])]
    for i in range(null.shape[1]):
        for j in range(i + 1, null.shape[1]):
            vecs += [(null[:, i] + null[:, j]) / math.sqrt(2.0), (null[:, i] - null[:, j]) / math.sqrt(2.0)]
    if rng is not None and n_random:
        for _ in range(n_random):
            u = rng.standard_normal(len(R))
            vecs.append(u / np.linalg.norm(u))
    cuts = []
    for u in vecs:
        u = tuple(float(v) for v in u)
        cuts.append(Cut("G", u))
        for s in rel.mscal:
            cuts += [Cut("lo", u, s=s), Cut("hi", u, s=s)]
    return cuts
