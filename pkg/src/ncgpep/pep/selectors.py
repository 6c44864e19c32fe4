"""Symbolic selector vectors and the data matrices built from them.

A selector is a column combination of the Gram factor ``H`` whose
coefficients may depend polynomially on scalar decision variables (step
sizes, CG parameters, products of them). It is stored as a mapping from a
monomial (sorted tuple of variable indices, ``()`` for the constant part) to
a coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

Monomial = tuple[int, ...]


class SymVec:
    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict[Monomial, np.ndarray] | None = None):
        self.dim = dim
        self.terms: dict[Monomial, np.ndarray] = {}
        for m, v in (terms or {}).items():
            self._acc(tuple(sorted(m)), np.asarray(v, dtype=float))

    @classmethod
    def zero(cls, dim: int) -> "SymVec":
        return cls(dim)

    @classmethod
    def unit(cls, dim: int, i: int) -> "SymVec":
        e = np.zeros(dim)
        e[i] = 1.0
        return cls(dim, {(): e})

    def _acc(self, m: Monomial, v: np.ndarray) -> None:
        if m in self.terms:
            self.terms[m] = self.terms[m] + v
        else:
            self.terms[m] = v.copy()

    def __add__(self, other: "SymVec") -> "SymVec":
        out = SymVec(self.dim, self.terms)
        for m, v in other.terms.items():
            out._acc(m, v)
        return out

    def __neg__(self) -> "SymVec":
        return SymVec(self.dim, {m: -v for m, v in self.terms.items()})

    def __sub__(self, other: "SymVec") -> "SymVec":
        return self + (-other)

    def scale(self, coef: float = 1.0, var: int | None = None) -> "SymVec":
        """Multiply by ``coef`` and, optionally, by the scalar variable ``var``."""
        out = SymVec(self.dim)
        for m, v in self.terms.items():
            key = m if var is None else tuple(sorted(m + (var,)))
            out._acc(key, coef * v)
        return out

    def degree(self) -> int:
        return max((len(m) for m, v in self.terms.items() if np.any(v)), default=0)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim)
        for m, v in self.terms.items():
            out += np.prod([z[i] for i in m]) * v if m else v
        return out


class SymMat:
    """Symmetric matrix with polynomial entries, stored per monomial."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict[Monomial, np.ndarray] | None = None):
        self.dim = dim
        self.terms: dict[Monomial, np.ndarray] = {}
        for m, M in (terms or {}).items():
            self._acc(tuple(sorted(m)), np.asarray(M, dtype=float))

    def _acc(self, m: Monomial, M: np.ndarray) -> None:
        if m in self.terms:
            self.terms[m] = self.terms[m] + M
        else:
            self.terms[m] = M.copy()

    def __add__(self, other: "SymMat") -> "SymMat":
        out = SymMat(self.dim, self.terms)
        for m, M in other.terms.items():
            out._acc(m, M)
        return out

    def __sub__(self, other: "SymMat") -> "SymMat":
        return self + other.scale(-1.0)

    def scale(self, coef: float) -> "SymMat":
        return SymMat(self.dim, {m: coef * M for m, M in self.terms.items()})

    def degree(self) -> int:
        return max((len(m) for m, M in self.terms.items() if np.any(M)), default=0)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for m, M in self.terms.items():
            out += (np.prod([z[i] for i in m]) if m else 1.0) * M
        return out

    def entry_poly(self, a: int, b: int) -> dict[Monomial, float]:
        return {m: float(M[a, b]) for m, M in self.terms.items() if M[a, b] != 0.0}


def sym_outer(u: SymVec, v: SymVec) -> SymMat:
    """The symmetric outer product ``u ⊙ v = (u v^T + v u^T) / 2``."""
    out = SymMat(u.dim)
    for mu, a in u.terms.items():
        for mv, b in v.terms.items():
            out._acc(tuple(sorted(mu + mv)), 0.5 * (np.outer(a, b) + np.outer(b, a)))
    return out


@dataclass
class SelectorBasis:
    """Per-label selectors in a fixed Gram layout.

    ``x``, ``g`` and ``d`` map a label to its symbolic column combination;
    ``f`` maps a label to its coefficient row over the ``F`` vector.
    """

    gram_size: int
    f_size: int
    labels: list[str]
    x: dict[str, SymVec] = field(default_factory=dict)
    g: dict[str, SymVec] = field(default_factory=dict)
    d: dict[str, SymVec] = field(default_factory=dict)
    f: dict[str, np.ndarray] = field(default_factory=dict)
    column_names: list[str] = field(default_factory=list)

    def zero(self) -> SymVec:
        return SymVec.zero(self.gram_size)

    def e(self, i: int) -> SymVec:
        return SymVec.unit(self.gram_size, i)

    def fe(self, i: int | None) -> np.ndarray:
        out = np.zeros(self.f_size)
        if i is not None:
            out[i] = 1.0
        return out


class DataMatrices:
    """The matrices ``A, B, C, C~, D, D~, E`` and vectors ``a`` of a basis."""

    def __init__(self, basis: SelectorBasis):
        self.b = basis

    def A(self, i: str, j: str) -> SymMat:
        b = self.b
        return sym_outer(b.g[j], b.x[i] - b.x[j])

    def B(self, i: str, j: str) -> SymMat:
        dx = self.b.x[i] - self.b.x[j]
        return sym_outer(dx, dx)

    def C(self, i: str, j: str) -> SymMat:
        dg = self.b.g[i] - self.b.g[j]
        return sym_outer(dg, dg)

    def C_star(self, i: str) -> SymMat:
        return sym_outer(self.b.g[i], self.b.g[i])

    def Ct(self, i: str, j: str) -> SymMat:
        dd = self.b.d[i] - self.b.d[j]
        return sym_outer(dd, dd)

    def Ct_star(self, i: str) -> SymMat:
        return sym_outer(self.b.d[i], self.b.d[i])

    def D(self, i: str, j: str) -> SymMat:
        return sym_outer(self.b.g[i], self.b.g[j])

    def Dt(self, i: str, j: str) -> SymMat:
        return sym_outer(self.b.g[i], self.b.d[j])

    def E(self, i: str, j: str) -> SymMat:
        b = self.b
        return sym_outer(b.g[i] - b.g[j], b.x[i] - b.x[j])

    def a(self, i: str, j: str) -> np.ndarray:
        return self.b.f[j] - self.b.f[i]


def ordered_pairs(labels: Iterable[str]) -> list[tuple[str, str]]:
    labels = list(labels)
    return [(i, j) for i in labels for j in labels if i != j]
