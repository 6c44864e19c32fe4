"""Data of the class F_{mu,L}: triplets, interpolation and the explicit extension.

The extension of an interpolable triplet set is

    f(y) = max_{a in simplex} (L/2)||y||^2 - ((L-mu)/2)||y - V a / (L-mu)||^2 + c^T a

with ``V[:, i] = g_i - mu x_i`` and
``c_i = f_i + ||g_i - L x_i||^2 / (2(L-mu)) - (L/2)||x_i||^2``.
The inner maximization is solved by an away-step conditional-gradient loop.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

TOL_FEAS = 1e-6


@dataclass(frozen=True)
class ClassParams:
    mu: float
    L: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.mu < self.L < math.inf):
            raise ValueError(f"need 0 <= mu < L < inf, got mu={self.mu}, L={self.L}")

    @property
    def q(self) -> float:
        return self.mu / self.L

    @classmethod
    def from_q(cls, q: float, L: float = 1.0) -> "ClassParams":
        return cls(q * L, L)


@dataclass(frozen=True)
class Triplet:
    x: np.ndarray
    g: np.ndarray
    f: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).ravel()
        g = np.asarray(self.g, dtype=float).ravel()
        if x.shape != g.shape:
            raise ValueError(f"point and gradient dimensions differ: {x.shape} vs {g.shape}")
        if not math.isfinite(self.f):
            raise ValueError("function value must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", float(self.f))


@dataclass
class TripletSet:
    items: list[Triplet]
    labels: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.labels:
            self.labels = [str(i) for i in range(len(self.items))]
        if len(self.labels) != len(self.items):
            raise ValueError("one label per triplet required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        dims = {t.x.shape[0] for t in self.items}
        if len(dims) > 1:
            raise ValueError(f"triplets have mixed dimensions {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, label: str) -> Triplet:
        return self.items[self.labels.index(label)]

    @property
    def dim(self) -> int:
        return self.items[0].x.shape[0] if self.items else 0

    @property
    def X(self) -> np.ndarray:
        return np.array([t.x for t in self.items])

    @property
    def Gr(self) -> np.ndarray:
        return np.array([t.g for t in self.items])

    @property
    def F(self) -> np.ndarray:
        return np.array([t.f for t in self.items])

    @classmethod
    def from_arrays(cls, X, Gr, F, labels: Sequence[str] | None = None) -> "TripletSet":
        items = [Triplet(np.asarray(x), np.asarray(g), float(f)) for x, g, f in zip(X, Gr, F)]
        return cls(items, list(labels) if labels is not None else [])

    # JSON interchange ------------------------------------------------------
    def to_json_dict(self, params: ClassParams) -> dict:
        return {
            "mu": params.mu,
            "L": params.L,
            "labels": list(self.labels),
            "points": self.X.tolist(),
            "gradients": self.Gr.tolist(),
            "values": self.F.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> tuple["TripletSet", ClassParams]:
        missing = {"mu", "L", "labels", "points", "gradients", "values"} - set(d)
        if missing:
            raise ValueError(f"triplet JSON lacks fields {sorted(missing)}")
        n = len(d["labels"])
        if not (len(d["points"]) == len(d["gradients"]) == len(d["values"]) == n):
            raise ValueError("triplet JSON arrays have inconsistent lengths")
        return cls.from_arrays(d["points"], d["gradients"], d["values"], d["labels"]), ClassParams(d["mu"], d["L"])


def load_triplets(path: str | Path) -> tuple[TripletSet, ClassParams]:
    return TripletSet.from_json_dict(json.loads(Path(path).read_text()))


def save_triplets(path: str | Path, S: TripletSet, p: ClassParams) -> None:
    Path(path).write_text(json.dumps(S.to_json_dict(p), indent=2) + "\n")


@dataclass
class SimplexWeights:
    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=float)
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        self.alpha = a


# ---------------------------------------------------------------------------


def interpolation_residuals(S: TripletSet, p: ClassParams) -> np.ndarray:
    """Matrix ``r[i, j]`` of slacks in the pairwise interpolation inequalities.

    The set is interpolable by a function of F_{mu,L} iff every off-diagonal
    entry is nonnegative. The diagonal is set to zero.
    """
    if len(S) < 2:
        raise ValueError("need at least two triplets")
    X, Gr, F = S.X, S.Gr, S.F
    dX = X[:, None, :] - X[None, :, :]
    dG = Gr[:, None, :] - Gr[None, :, :]
    lin = np.einsum("jk,ijk->ij", Gr, dX)
    quad = (
        np.einsum("ijk,ijk->ij", dG, dG) / p.L
        + p.mu * np.einsum("ijk,ijk->ij", dX, dX)
        - 2.0 * p.q * np.einsum("ijk,ijk->ij", dG, dX)
    )
    r = F[:, None] - F[None, :] - lin - quad / (2.0 * (1.0 - p.q))
    np.fill_diagonal(r, 0.0)
    return r


def check_interpolable(S: TripletSet, p: ClassParams, tol: float = TOL_FEAS) -> float:
    """Raise if a residual is below ``-tol``; warn if slightly negative. Returns the min residual."""
    r = interpolation_residuals(S, p)
    np.fill_diagonal(r, np.inf)
    worst = float(r.min())
    if worst < -tol:
        i, j = np.unravel_index(np.argmin(r), r.shape)
        raise ValueError(
            f"triplets not interpolable: residual({S.labels[i]},{S.labels[j]}) = {worst:.3e} < -{tol:g}"
        )
    if worst < 0.0:
        warnings.warn(f"triplets interpolable only within tolerance (min residual {worst:.2e})", stacklevel=2)
    return worst


@dataclass
class ExtensionResult:
    value: float
    weights: SimplexWeights
    gradient: np.ndarray
    gap: float
    iterations: int
    # bound on ||V(a - a*)||, i.e. on the distance of the returned gradient to the true one
    gradient_spread: float


class Extension:
    """Value/gradient oracle of the smooth strongly convex extension of ``S``."""

    def __init__(self, S: TripletSet, p: ClassParams, *, tol: float = 1e-10, max_iter: int = 100_000,
                 check: bool = True):
        if check:
            check_interpolable(S, p)
        self.S, self.p = S, p
        self.tol, self.max_iter = tol, max_iter
        X, Gr, F = S.X, S.Gr, S.F
        L, mu = p.L, p.mu
        self.V = (Gr - mu * X).T  # n x m
        self.c = F + np.sum((Gr - L * X) ** 2, axis=1) / (2.0 * (L - mu)) - 0.5 * L * np.sum(X**2, axis=1)
        self.VtV = self.V.T @ self.V
        self.calls = 0

    def solve(self, y: np.ndarray) -> ExtensionResult:
        """Away-step Frank-Wolfe on ``min psi(a) = ||r - V a||^2 / (2k) - c^T a`` over the simplex."""
        self.calls += 1
        y = np.asarray(y, dtype=float).ravel()
        L, mu = self.p.L, self.p.mu
        kappa = L - mu
        V, VtV, c = self.V, self.VtV, self.c
        m = len(c)
        Vty = V.T @ y
        # grad psi = VtV a / kappa - (V^T y + c)
        b = Vty + c
        a = np.zeros(m)
        # start at the best vertex
        vert = -0.5 * np.diag(VtV) / kappa + b
        a[int(np.argmax(vert))] = 1.0
        Qa = VtV @ a
        gap = np.inf
        it = 0
        tol = self.tol * max(1.0, float(np.abs(b).max()))
        for it in range(1, self.max_iter + 1):
            grad = Qa / kappa - b
            s = int(np.argmin(grad))
            support = np.flatnonzero(a > 0)
            v = support[int(np.argmax(grad[support]))]
            gap_fw = float(grad @ a - grad[s])
            gap = gap_fw
            if gap_fw <= tol:
                break
            if it % 10 == 0 and len(support) > 1:
                a = self._corrective(a, support, b, kappa)
                Qa = VtV @ a
                continue
            gap_away = float(grad[v] - grad @ a)
            if gap_fw >= gap_away:
                direction = -a.copy()
                direction[s] += 1.0
                step_max = 1.0
            else:
                direction = a.copy()
                direction[v] -= 1.0
                step_max = a[v] / (1.0 - a[v]) if a[v] < 1.0 else np.inf
            Qd = VtV @ direction
            curv = float(direction @ Qd) / kappa
            slope = float(grad @ direction)
            step = step_max if curv <= 0 else min(step_max, -slope / curv)
            a = a + step * direction
            a[a < 1e-300] = 0.0
            if step == step_max and gap_fw < gap_away:
                a[v] = 0.0
            a /= a.sum()
            Qa = VtV @ a
        else:
            raise RuntimeError(f"extension inner maximization did not converge in {self.max_iter} iterations "
                               f"(gap {gap:.2e})")
        Va = V @ a
        value = float(0.5 * L * (y @ y) - 0.5 * kappa * np.sum((y - Va / kappa) ** 2) + c @ a)
        grad_y = mu * y + Va
        a = np.clip(a, 0.0, None)
        a /= a.sum()
        return ExtensionResult(value, SimplexWeights(a), grad_y, max(gap, 0.0), it,
                               math.sqrt(2.0 * kappa * max(gap, 0.0)))

    def _corrective(self, a, support, b, kappa):
        """Move toward the minimizer over the affine hull of the support.

        If the hull carries no minimizer (singular and inconsistent KKT
        system) the objective is linear along a null direction; follow that
        ray instead. Either way the move stops at the simplex boundary.
        """
        k = len(support)
        Q = self.VtV[np.ix_(support, support)] / kappa
        g = Q @ a[support] - b[support]
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = Q
        K[:k, k] = K[k, :k] = 1.0
        rhs = np.append(-g, 0.0)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        scale = max(1.0, float(np.abs(b).max()))
        if np.max(np.abs(K @ sol - rhs)) <= 1e-12 * scale:
            d, t_max = sol[:k], 1.0
        else:
            P = np.eye(k) - 1.0 / k
            w, U = np.linalg.eigh(P @ Q @ P)
            N = U[:, w <= 1e-12 * max(1.0, float(w.max()))]
            d = -N @ (N.T @ (P @ g))
            t_max = np.inf
        neg = d < -1e-15
        if neg.any():
            t_max = min(t_max, float(np.min(-a[support][neg] / d[neg])))
        if not np.isfinite(t_max) or t_max <= 0:
            return a
        out = a.copy()
        out[support] = np.clip(a[support] + t_max * d, 0.0, None)
        out /= out.sum()
        psi = lambda v: 0.5 * v @ self.VtV @ v / kappa - b @ v  # noqa: E731
        return out if psi(out) <= psi(a) else a

    def value(self, y: np.ndarray) -> float:
        return self.solve(y).value

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return self.solve(y).gradient

    def __call__(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        r = self.solve(y)
        return r.value, r.gradient


def extension_value(S: TripletSet, p: ClassParams, y: np.ndarray) -> tuple[float, SimplexWeights]:
    r = Extension(S, p).solve(y)
    return r.value, r.weights


def extension_gradient(S: TripletSet, p: ClassParams, y: np.ndarray) -> np.ndarray:
    return Extension(S, p).solve(y).gradient


# ---------------------------------------------------------------------------

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray]]


class LineSearchError(RuntimeError):
    pass


def exact_line_search(
    oracle: Oracle,
    x: np.ndarray,
    d: np.ndarray,
    *,
    L: float = 1.0,
    rtol: float = 1e-8,
    max_doublings: int = 200,
    max_bisections: int = 200,
) -> tuple[float, np.ndarray]:
    """Minimize ``f(x - gamma d)`` over ``gamma >= 0``.

    Brackets a sign change of the directional derivative by doubling from
    ``1/L`` and then bisects until
    ``|<grad f(x - gamma d), d>| <= rtol ||d|| ||grad f(x - gamma d)|| + 1e-12``.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    _, g0 = oracle(x)
    if float(g0 @ d) <= 0.0:
        raise LineSearchError("d is not a descent direction for the step x - gamma d")
    nd = float(np.linalg.norm(d))

    def slope(gam: float) -> tuple[float, np.ndarray]:
        _, g = oracle(x - gam * d)
        return float(g @ d), g

    def done(s: float, g: np.ndarray) -> bool:
        return abs(s) <= rtol * nd * float(np.linalg.norm(g)) + 1e-12

    lo, hi = 0.0, 1.0 / L
    s_hi, g_hi = slope(hi)
    n = 0
    while s_hi > 0.0:
        if done(s_hi, g_hi):
            return hi, x - hi * d
        n += 1
        if n > max_doublings:
            raise LineSearchError("bracket expansion exceeded its bound")
        lo, hi = hi, 2.0 * hi
        s_hi, g_hi = slope(hi)
    if done(s_hi, g_hi):
        return hi, x - hi * d
    mid = hi
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        s, g = slope(mid)
        if done(s, g):
            break
        if s > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return mid, x - mid * d


def quadratic_oracle(A: np.ndarray, b: np.ndarray | None = None) -> Oracle:
    """``f(x) = x^T A x / 2 - b^T x``."""
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)

    def oracle(x: np.ndarray) -> tuple[float, np.ndarray]:
        Ax = A @ x
        return float(0.5 * x @ Ax - b @ x), Ax - b

    return oracle
