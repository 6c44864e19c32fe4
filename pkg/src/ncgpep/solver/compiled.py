"""Array form of a list of quadratic expressions (fast values and Jacobians)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..pep.qcqp import QuadExpr


class CompiledQuads:
    def __init__(self, exprs: Sequence[QuadExpr], n: int):
        self.m, self.n = len(exprs), n
        self.const = np.array([e.const for e in exprs], dtype=float)
        self.A = np.zeros((self.m, n))
        rows, ii, jj, cc = [], [], [], []
        for r, e in enumerate(exprs):
            for i, c in e.lin.items():
                self.A[r, i] += c
            for (i, j), c in e.quad.items():
                rows.append(r)
                ii.append(i)
                jj.append(j)
                cc.append(c)
        self.rows = np.array(rows, dtype=int)
        self.ii = np.array(ii, dtype=int)
        self.jj = np.array(jj, dtype=int)
        self.cc = np.array(cc, dtype=float)

    def value(self, z: np.ndarray) -> np.ndarray:
        v = self.const + self.A @ z
        if self.rows.size:
            v += np.bincount(self.rows, self.cc * z[self.ii] * z[self.jj], minlength=self.m)
        return v

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        J = self.A.copy()
        if self.rows.size:
            np.add.at(J, (self.rows, self.ii), self.cc * z[self.jj])
            np.add.at(J, (self.rows, self.jj), self.cc * z[self.ii])
        return J
