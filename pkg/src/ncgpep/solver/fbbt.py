"""Feasibility-based bound tightening by interval arithmetic.

Each constraint ``sum_t term_t (sense) 0`` bounds one term by the target
minus the interval of the others; the term is then inverted for the box of
its variable(s). Gram-specific rules add ``G[a,a] >= 0`` and the 2x2 minor
bounds ``G[a,b]^2 <= G[a,a] G[b,b]``.
"""

from __future__ import annotations

import math

import numpy as np

from ..pep.qcqp import QcqpProblem, QuadExpr

INF = math.inf


class Infeasible(Exception):
    pass


def _mul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    ps = []
    for x in a:
        for y in b:
            ps.append(0.0 if (x == 0.0 or y == 0.0) else x * y)
    return min(ps), max(ps)


def _sq(a: tuple[float, float]) -> tuple[float, float]:
    lo, hi = a
    if lo >= 0:
        return lo * lo, hi * hi
    if hi <= 0:
        return hi * hi, lo * lo
    return 0.0, max(lo * lo, hi * hi)


def _div(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float] | None:
    """a / b for an interval b excluding 0 (None when b straddles 0)."""
    if b[0] <= 0.0 <= b[1]:
        return None
    inv = (1.0 / b[1], 1.0 / b[0])
    return _mul(a, inv)


class _Term:
    __slots__ = ("coef", "i", "j")

    def __init__(self, coef: float, i: int, j: int | None):
        self.coef, self.i, self.j = coef, i, j


def _terms(e: QuadExpr) -> list[_Term]:
    out = [_Term(c, i, None) for i, c in e.lin.items() if c != 0.0]
    out += [_Term(c, i, j) for (i, j), c in e.quad.items() if c != 0.0]
    return out


class Propagator:
    def __init__(self, prob: QcqpProblem, constraints=None):
        self.prob = prob
        cons = prob.active_constraints() if constraints is None else constraints
        self.rows = [(_terms(c.expr), c.expr.const, c.sense) for c in cons]
        n = prob.gram_size
        self.diag = [int(prob.gram_index[a, a]) for a in range(n)]
        self.off = [(int(prob.gram_index[a, b]), int(prob.gram_index[a, a]), int(prob.gram_index[b, b]))
                    for a in range(n) for b in range(a + 1, n)]

    def _term_iv(self, t: _Term, lb, ub) -> tuple[float, float]:
        if t.j is None:
            r = (lb[t.i], ub[t.i])
        elif t.i == t.j:
            r = _sq((lb[t.i], ub[t.i]))
        else:
            r = _mul((lb[t.i], ub[t.i]), (lb[t.j], ub[t.j]))
        return _mul(r, (t.coef, t.coef))

    def run(self, lb: np.ndarray, ub: np.ndarray, sweeps: int = 6, cutoff: tuple[QuadExpr, float] | None = None,
            rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Tightened copies of ``(lb, ub)``; raises :class:`Infeasible`.

        ``cutoff = (objective, value)`` adds ``objective >= value``.
        """
        lb = np.array(lb, dtype=float)
        ub = np.array(ub, dtype=float)
        rows = list(self.rows)
        if cutoff is not None:
            e, v = cutoff
            rows.append((_terms(e), e.const - v, ">="))
        for _ in range(sweeps):
            changed = False
            for terms, const, sense in rows:
                ivs = [self._term_iv(t, lb, ub) for t in terms]
                if sense == "==":
                    tgt = (-const, -const)
                elif sense == "<=":
                    tgt = (-INF, -const)
                else:
                    tgt = (-const, INF)
                s_lo = sum(iv[0] for iv in ivs)
                s_hi = sum(iv[1] for iv in ivs)
                if s_lo > tgt[1] + 1e-9 * (1 + abs(tgt[1])) or s_hi < tgt[0] - 1e-9 * (1 + abs(tgt[0])):
                    raise Infeasible("constraint interval empty")
                ninf_lo = sum(1 for iv in ivs if iv[0] == -INF)
                ninf_hi = sum(1 for iv in ivs if iv[1] == INF)
                for t, iv in zip(terms, ivs):
                    # interval of the sum of the other terms
                    if iv[0] == -INF:
                        o_lo = -INF if ninf_lo > 1 else _others(ivs, 0, iv)
                    else:
                        o_lo = -INF if ninf_lo > 0 else s_lo - iv[0]
                    if iv[1] == INF:
                        o_hi = INF if ninf_hi > 1 else _others(ivs, 1, iv)
                    else:
                        o_hi = INF if ninf_hi > 0 else s_hi - iv[1]
                    r_lo = tgt[0] - o_hi if tgt[0] != -INF and o_hi != INF else -INF
                    r_hi = tgt[1] - o_lo if tgt[1] != INF and o_lo != -INF else INF
                    if r_lo == -INF and r_hi == INF:
                        continue
                    changed |= self._invert(t, (r_lo, r_hi), lb, ub, rtol)
            changed |= self._gram(lb, ub, rtol)
            if not changed:
                break
        return lb, ub

    def _set(self, k: int, lo: float, hi: float, lb, ub, rtol: float) -> bool:
        ch = False
        scale = rtol * max(1.0, abs(lb[k]) if np.isfinite(lb[k]) else 1.0, abs(ub[k]) if np.isfinite(ub[k]) else 1.0)
        if lo > lb[k] + scale:
            lb[k] = lo
            ch = True
        if hi < ub[k] - scale:
            ub[k] = hi
            ch = True
        if lb[k] > ub[k]:
            if lb[k] - ub[k] <= 1e-9 * max(1.0, abs(ub[k])):
                m = 0.5 * (lb[k] + ub[k])
                lb[k] = ub[k] = m
            else:
                raise Infeasible(f"empty box for variable {k}")
        return ch

    def _invert(self, t: _Term, r: tuple[float, float], lb, ub, rtol: float) -> bool:
        c = t.coef
        r = (r[0] / c, r[1] / c) if c > 0 else (r[1] / c, r[0] / c)
        if t.j is None:
            return self._set(t.i, r[0], r[1], lb, ub, rtol)
        if t.i == t.j:
            if r[1] < 0:
                raise Infeasible("negative square")
            s = math.sqrt(r[1]) if r[1] != INF else INF
            lo, hi = -s, s
            if r[0] > 0 and np.isfinite(r[0]):
                q = math.sqrt(r[0])
                if lb[t.i] > -q:
                    lo = q
                elif ub[t.i] < q:
                    hi = -q
            return self._set(t.i, lo, hi, lb, ub, rtol)
        ch = False
        for a, b in ((t.i, t.j), (t.j, t.i)):
            d = _div(r, (lb[b], ub[b]))
            if d is not None:
                ch |= self._set(a, d[0], d[1], lb, ub, rtol)
        return ch

    def _gram(self, lb, ub, rtol: float) -> bool:
        ch = False
        for k in self.diag:
            ch |= self._set(k, 0.0, INF, lb, ub, rtol)
        for k, ka, kb in self.off:
            if np.isfinite(ub[ka]) and np.isfinite(ub[kb]):
                s = math.sqrt(max(ub[ka], 0.0) * max(ub[kb], 0.0))
                ch |= self._set(k, -s, s, lb, ub, rtol)
            lo2 = _sq((lb[k], ub[k]))[0]
            if lo2 > 0:
                if np.isfinite(ub[kb]) and ub[kb] > 0:
                    ch |= self._set(ka, lo2 / ub[kb], INF, lb, ub, rtol)
                if np.isfinite(ub[ka]) and ub[ka] > 0:
                    ch |= self._set(kb, lo2 / ub[ka], INF, lb, ub, rtol)
        return ch


def _others(ivs, side: int, skip) -> float:
    """Sum of one end of every interval except ``skip`` (compared by identity)."""
    return sum(iv[side] for iv in ivs if iv is not skip)
