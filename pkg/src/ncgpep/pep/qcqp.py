"""Nonconvex QCQP container in lifted Gram variables.

A :class:`QcqpProblem` is a flat registry of scalar variables (Gram entries,
factor entries, function values and the method scalars) together with an
objective and a list of constraints, each of which is a quadratic form

    const + sum_u a_u z_u + sum_{u<=v} b_uv z_u z_v   (sense)   0.

The positive semidefinite coupling ``G = H^T H`` is kept apart from the
regular constraint list so that a solver can either enforce it literally
(``psd_mode="cholesky"``) or replace it by lazily generated eigenvector cuts
(``psd_mode="lazy"``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SENSES = ("<=", "==", ">=")
PSD_MODES = ("cholesky", "lazy")


@dataclass
class Variable:
    name: str
    kind: str
    lb: float
    ub: float
    # heuristic boxes are not implied by the model; solvers check interiority
    heuristic: bool = False


@dataclass
class QuadExpr:
    const: float = 0.0
    lin: dict[int, float] = field(default_factory=dict)
    quad: dict[tuple[int, int], float] = field(default_factory=dict)

    def copy(self) -> "QuadExpr":
        return QuadExpr(self.const, dict(self.lin), dict(self.quad))

    def add_lin(self, i: int, coef: float) -> None:
        if coef != 0.0:
            self.lin[i] = self.lin.get(i, 0.0) + coef

    def add_quad(self, i: int, j: int, coef: float) -> None:
        if coef == 0.0:
            return
        key = (i, j) if i <= j else (j, i)
        self.quad[key] = self.quad.get(key, 0.0) + coef

    def iadd(self, other: "QuadExpr", scale: float = 1.0) -> "QuadExpr":
        self.const += scale * other.const
        for i, c in other.lin.items():
            self.add_lin(i, scale * c)
        for (i, j), c in other.quad.items():
            self.add_quad(i, j, scale * c)
        return self

    def prune(self, tol: float = 0.0) -> "QuadExpr":
        self.lin = {i: c for i, c in self.lin.items() if abs(c) > tol}
        self.quad = {k: c for k, c in self.quad.items() if abs(c) > tol}
        return self

    def is_zero(self, tol: float = 1e-14) -> bool:
        return (
            abs(self.const) <= tol
            and all(abs(c) <= tol for c in self.lin.values())
            and all(abs(c) <= tol for c in self.quad.values())
        )

    def variables(self) -> set[int]:
        out = set(self.lin)
        for i, j in self.quad:
            out.add(i)
            out.add(j)
        return out

    def value(self, z: np.ndarray) -> float:
        v = self.const
        for i, c in self.lin.items():
            v += c * z[i]
        for (i, j), c in self.quad.items():
            v += c * z[i] * z[j]
        return float(v)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        grad = np.zeros(len(z))
        for i, c in self.lin.items():
            grad[i] += c
        for (i, j), c in self.quad.items():
            grad[i] += c * z[j]
            grad[j] += c * z[i]
        return grad

    def to_dict(self) -> dict[str, Any]:
        return {
            "const": self.const,
            "lin": [[i, c] for i, c in sorted(self.lin.items())],
            "quad": [[i, j, c] for (i, j), c in sorted(self.quad.items())],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QuadExpr":
        return cls(
            float(d["const"]),
            {int(i): float(c) for i, c in d["lin"]},
            {(int(i), int(j)): float(c) for i, j, c in d["quad"]},
        )


@dataclass
class Constraint:
    expr: QuadExpr
    sense: str
    tag: str

    def violation(self, z: np.ndarray) -> float:
        v = self.expr.value(z)
        if self.sense == "<=":
            return max(v, 0.0)
        if self.sense == ">=":
            return max(-v, 0.0)
        return abs(v)


class QcqpProblem:
    """Maximization QCQP over a registry of scalar variables.

    ``gram_index[i, j]`` holds the variable index of ``G[i, j]`` (symmetric
    lookup, one variable per unordered pair) and ``h_index[r, c]`` that of the
    factor entry ``H[r, c]``. ``definitions`` maps a derived variable (products
    of method scalars, Theta copies, ...) to the expression that pins it, so a
    partial point can be completed.
    """

    def __init__(self, name: str, gram_size: int, psd_mode: str = "lazy"):
        if psd_mode not in PSD_MODES:
            raise ValueError(f"psd_mode must be one of {PSD_MODES}, got {psd_mode!r}")
        self.name = name
        self.gram_size = gram_size
        self.psd_mode = psd_mode
        self.variables: list[Variable] = []
        self.index: dict[str, int] = {}
        self.objective = QuadExpr()
        self.constraints: list[Constraint] = []
        self.definitions: dict[int, QuadExpr] = {}
        self.meta: dict[str, Any] = {}
        self.gram_index = np.full((gram_size, gram_size), -1, dtype=int)
        self.h_index = np.full((gram_size, gram_size), -1, dtype=int)
        for i in range(gram_size):
            for j in range(i, gram_size):
                k = self.add_variable(f"G[{i},{j}]", "G", -np.inf, np.inf)
                self.gram_index[i, j] = self.gram_index[j, i] = k
        for r in range(gram_size):
            for c in range(gram_size):
                self.h_index[r, c] = self.add_variable(f"H[{r},{c}]", "H", -np.inf, np.inf)

    # registry -----------------------------------------------------------
    def add_variable(self, name: str, kind: str, lb: float, ub: float, heuristic: bool = False) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name!r}")
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub), heuristic))
        return self.index[name]

    def var(self, name: str) -> int:
        return self.index[name]

    def add_constraint(self, expr: QuadExpr, sense: str, tag: str) -> Constraint:
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        for i in expr.variables():
            if not 0 <= i < len(self.variables):
                raise ValueError(f"constraint {tag!r} references unknown variable {i}")
        con = Constraint(expr.prune(), sense, tag)
        self.constraints.append(con)
        return con

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def kinds(self) -> np.ndarray:
        return np.array([v.kind for v in self.variables])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        return lb, ub

    def gram_link_constraints(self) -> list[Constraint]:
        """The entrywise equalities ``G[i,j] = sum_r H[r,i] H[r,j]``."""
        out = []
        n = self.gram_size
        for i in range(n):
            for j in range(i, n):
                e = QuadExpr()
                e.add_lin(int(self.gram_index[i, j]), 1.0)
                for r in range(n):
                    e.add_quad(int(self.h_index[r, i]), int(self.h_index[r, j]), -1.0)
                out.append(Constraint(e, "==", "G=H^T H"))
        return out

    def active_constraints(self) -> list[Constraint]:
        if self.psd_mode == "cholesky":
            return self.constraints + self.gram_link_constraints()
        return list(self.constraints)

    # point helpers -------------------------------------------------------
    def gram_matrix(self, z: np.ndarray) -> np.ndarray:
        return z[self.gram_index]

    def factor_matrix(self, z: np.ndarray) -> np.ndarray:
        return z[self.h_index]

    def set_gram(self, z: np.ndarray, G: np.ndarray, H: np.ndarray | None = None) -> None:
        """Write ``G`` (and a square factor ``H`` with ``H^T H = G``) into ``z``."""
        G = 0.5 * (G + G.T)
        if H is None:
            H = gram_factor(G)
        n = self.gram_size
        iu = np.triu_indices(n)
        z[self.gram_index[iu]] = G[iu]
        z[self.h_index] = H

    def complete(self, z: np.ndarray, sweeps: int = 8) -> np.ndarray:
        """Fill derived variables from their definitions (in dependency order)."""
        z = np.array(z, dtype=float)
        for _ in range(sweeps):
            changed = False
            for k, expr in self.definitions.items():
                v = expr.value(z)
                if not np.isclose(v, z[k], rtol=0, atol=0):
                    z[k] = v
                    changed = True
            if not changed:
                break
        return z

    def objective_value(self, z: np.ndarray) -> float:
        return self.objective.value(z)

    def max_violation(self, z: np.ndarray, include_psd: bool = True) -> float:
        viol = max((c.violation(z) for c in self.constraints), default=0.0)
        if include_psd:
            viol = max(viol, max(0.0, -float(np.linalg.eigvalsh(self.gram_matrix(z)).min())))
        return viol

    def violation_report(self, z: np.ndarray, tol: float = 1e-8) -> list[tuple[str, float]]:
        return [(c.tag, c.violation(z)) for c in self.constraints if c.violation(z) > tol]

    def box_violation(self, z: np.ndarray, kinds: tuple[str, ...] | None = None) -> float:
        worst = 0.0
        for v, val in zip(self.variables, z):
            if kinds is not None and v.kind not in kinds:
                continue
            worst = max(worst, v.lb - val, val - v.ub)
        return worst

    def tags(self) -> list[str]:
        return [c.tag for c in self.constraints]

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "ncgpep-qcqp/1",
            "name": self.name,
            "sense": "maximize",
            "gram_size": self.gram_size,
            "psd_mode": self.psd_mode,
            "variables": [
                {"name": v.name, "kind": v.kind, "lb": _enc(v.lb), "ub": _enc(v.ub), "heuristic": v.heuristic}
                for v in self.variables
            ],
            "objective": self.objective.to_dict(),
            "constraints": [{"sense": c.sense, "tag": c.tag, **c.expr.to_dict()} for c in self.constraints],
            "definitions": [[k, e.to_dict()] for k, e in sorted(self.definitions.items())],
            "meta": _jsonable(self.meta),
        }

    def to_json(self, **kw: Any) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QcqpProblem":
        if d.get("format") != "ncgpep-qcqp/1":
            raise ValueError("unrecognized QCQP payload")
        prob = cls.__new__(cls)
        prob.name = d["name"]
        prob.gram_size = int(d["gram_size"])
        prob.psd_mode = d["psd_mode"]
        prob.variables = [
            Variable(v["name"], v["kind"], _dec(v["lb"]), _dec(v["ub"]), bool(v["heuristic"]))
            for v in d["variables"]
        ]
        prob.index = {v.name: i for i, v in enumerate(prob.variables)}
        prob.objective = QuadExpr.from_dict(d["objective"])
        prob.constraints = [Constraint(QuadExpr.from_dict(c), c["sense"], c["tag"]) for c in d["constraints"]]
        prob.definitions = {int(k): QuadExpr.from_dict(e) for k, e in d["definitions"]}
        prob.meta = d["meta"]
        n = prob.gram_size
        prob.gram_index = np.full((n, n), -1, dtype=int)
        prob.h_index = np.full((n, n), -1, dtype=int)
        for i in range(n):
            for j in range(i, n):
                prob.gram_index[i, j] = prob.gram_index[j, i] = prob.index[f"G[{i},{j}]"]
            for c in range(n):
                prob.h_index[i, c] = prob.index[f"H[{i},{c}]"]
        return prob

    @classmethod
    def from_json(cls, text: str) -> "QcqpProblem":
        return cls.from_dict(json.loads(text))

    def copy(self) -> "QcqpProblem":
        return QcqpProblem.from_dict(json.loads(self.to_json()))

    def __repr__(self) -> str:
        return (
            f"QcqpProblem({self.name!r}, gram_size={self.gram_size}, "
            f"n_vars={self.n_vars}, n_constraints={len(self.constraints)}, psd_mode={self.psd_mode!r})"
        )


def gram_factor(G: np.ndarray) -> np.ndarray:
    """Square factor ``H`` with ``H^T H = G`` (negative eigenvalues clipped)."""
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    w = np.clip(w, 0.0, None)
    return np.sqrt(w)[:, None] * V.T


def _enc(x: float) -> float | str:
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _dec(x: float | str) -> float:
    return float(x)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
