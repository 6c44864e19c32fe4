"""Stage 1: feasible points from a method run on a random quadratic.

The run is assembled into the problem's variables (Gram columns, function
values, scalars) and rescaled by homogeneity to the problem normalization.
"""

from __future__ import annotations

import numpy as np

from ..pep.qcqp import QcqpProblem
from .report import Incumbent

MAX_RETRIES = 50


class Stage1Error(RuntimeError):
    pass


def random_quadratic(rng: np.random.Generator, dim: int, mu: float, L: float) -> np.ndarray:
    """Symmetric matrix with spectrum in [mu, L], both extremes included."""
    return _random_quadratic(rng, dim, mu, L)[0]


def _random_quadratic(rng: np.random.Generator, dim: int, mu: float, L: float) -> tuple[np.ndarray, np.ndarray]:
    lam = rng.uniform(mu, L, size=dim)
    lam[0], lam[-1] = mu, L
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return (Q * lam) @ Q.T, Q


def _start(rng: np.random.Generator, Q: np.ndarray, extreme: bool) -> np.ndarray:
    """Random start; ``extreme`` concentrates it on the two extreme eigenvectors.

    Generic starts in several dimensions often make one step almost exact,
    which pushes gradient ratios outside the heuristic boxes.
    """
    if not extreme:
        return rng.standard_normal(Q.shape[0])
    t = rng.uniform(0.0, 2.0 * np.pi)
    return np.cos(t) * Q[:, 0] + np.sin(t) * Q[:, -1] + 0.05 * rng.standard_normal(Q.shape[0])


def _quality_direction(rng: np.random.Generator, g: np.ndarray, c: float) -> np.ndarray:
    """``g + v`` with ``v`` orthogonal to ``g`` and ``||v||^2 = (c - 1) ||g||^2``."""
    v = rng.standard_normal(g.shape)
    v -= (v @ g) / (g @ g) * g
    nv = np.linalg.norm(v)
    if c == 1.0 or nv == 0.0:
        return g.copy()
    return g + v * np.sqrt((c - 1.0) * (g @ g)) / nv


def _step(A: np.ndarray, x: np.ndarray, d: np.ndarray) -> tuple[float, np.ndarray]:
    gam = float((A @ x) @ d) / float(d @ A @ d)
    return gam, x - gam * d


def embed(prob: QcqpProblem, columns: dict[str, np.ndarray], values: dict[str, float],
          scalars: dict[str, float]) -> np.ndarray:
    """Problem vector from concrete vectors (by column name), values and scalars.

    Columns absent from ``columns`` are left zero; derived variables are
    filled from their definitions.
    """
    basis = prob.meta["basis"]
    names = basis["columns"]
    dim = len(next(iter(columns.values())))
    P = np.zeros((dim, len(names)))
    for k, nm in enumerate(names):
        if nm in columns:
            P[:, k] = columns[nm]
    z = np.zeros(prob.n_vars)
    G = P.T @ P
    prob.set_gram(z, G)
    for lab, v in values.items():
        z[prob.var(f"F[{lab}]")] = v
    for nm, v in scalars.items():
        z[prob.var(nm)] = v
    return prob.complete(z)


def _method_betas(eta: int, g_new: np.ndarray, g: np.ndarray) -> float:
    return (float(g_new @ g_new) - eta * float(g_new @ g)) / float(g @ g)


def _direction_point(prob: QcqpProblem, rng: np.random.Generator, extreme: bool) -> np.ndarray:
    m = prob.meta
    dim = max(prob.gram_size, 3)
    A, Q = _random_quadratic(rng, dim, m["mu"], m["L"])
    xp = _start(rng, Q, extreme)
    gp = A @ xp
    dp = _quality_direction(rng, gp, m["c"])
    gam, x0 = _step(A, xp, dp)
    g0 = A @ x0
    beta = _method_betas(m["eta"], g0, gp)
    s = 1.0 / np.linalg.norm(g0)
    vals = {"-1": 0.5 * s * s * float(xp @ A @ xp), "0": 0.5 * s * s * float(x0 @ A @ x0)}
    if m["family"] == "direction-scaled":
        cols = {"x[-1]": s * xp, "g[-1]": s * gp, "g[0]": s * g0, "s": s * (x0 - xp)}
        return embed(prob, cols, vals, {"tau[-1]": 1.0 / gam, "omega[-1]": beta / gam})
    cols = {"x[-1]": s * xp, "g[-1]": s * gp, "g[0]": s * g0, "d[-1]": s * dp}
    return embed(prob, cols, vals, {"gamma[-1]": gam, "beta[-1]": beta})


def _multi_point(prob: QcqpProblem, rng: np.random.Generator, extreme: bool) -> np.ndarray:
    m = prob.meta
    N, fam = m["N"], m["family"]
    exact = fam in ("exact", "lower-exact")
    fixed = m.get("betas")
    dim = max(prob.gram_size, 3)
    A, Q = _random_quadratic(rng, dim, m["mu"], m["L"])
    x = _start(rng, Q, extreme)
    g = A @ x
    d = g.copy() if exact else _quality_direction(rng, g, m["c"])
    xs, gs, ds, gams, betas = [x], [g], [d], [], []
    for i in range(N):
        gam, x = _step(A, x, d)
        g_new = A @ x
        gams.append(gam)
        xs.append(x)
        gs.append(g_new)
        if i < N - 1:
            b = float(fixed[i]) if fixed is not None else _method_betas(m["eta"], g_new, g)
            betas.append(b)
            d = g_new + b * d
            ds.append(d)
        g = g_new
    f0 = 0.5 * float(xs[0] @ A @ xs[0])
    s = 1.0 / np.sqrt(f0)
    vals = {str(i): 0.5 * s * s * float(xi @ A @ xi) for i, xi in enumerate(xs)}
    cols = {f"g[{i}]": s * gi for i, gi in enumerate(gs)}
    cols["d[0]"] = s * ds[0]
    if fam in ("lyapunov", "exact"):
        cols.update({f"x[{i}]": s * xi for i, xi in enumerate(xs)})
        scal = {f"beta[{i}]": b for i, b in enumerate(betas)}
    else:
        cols["x[0]"] = s * xs[0]
        scal = {f"gamma[{i}]": gm for i, gm in enumerate(gams)}
    return embed(prob, cols, vals, scal)


def sample_point(prob: QcqpProblem, rng: np.random.Generator, extreme: bool = False) -> np.ndarray:
    fam = prob.meta.get("family")
    if fam in ("direction", "direction-scaled"):
        return _direction_point(prob, rng, extreme)
    if fam in ("lyapunov", "exact", "lower", "lower-exact"):
        return _multi_point(prob, rng, extreme)
    raise Stage1Error(f"no stage-1 construction for family {fam!r}")


def stage1_feasible(prob: QcqpProblem, seed: int = 0, *, tol: float = 1e-8, tries: int = 8,
                    allow_infeasible: bool = False) -> Incumbent:
    """Best of ``tries`` feasible random-quadratic points (retrying degenerate draws).

    With frozen CG parameters a random run rarely satisfies the parameter
    definitions; ``allow_infeasible`` then returns the least violated draw,
    to be repaired by the local stage.
    """
    rng = np.random.default_rng(seed)
    best: Incumbent | None = None
    closest: tuple[float, np.ndarray] | None = None
    attempts = 0
    while attempts < MAX_RETRIES and (best is None or attempts < tries):
        attempts += 1
        try:
            z = sample_point(prob, rng, extreme=attempts % 2 == 0)
        except (FloatingPointError, ZeroDivisionError):
            continue
        if not np.all(np.isfinite(z)):
            continue
        viol = max(prob.max_violation(z), prob.box_violation(z))
        if viol > tol:
            if closest is None or viol < closest[0]:
                closest = (viol, z)
            continue
        val = prob.objective_value(z)
        if best is None or val > best.value:
            best = Incumbent(z, val, "stage1")
    if best is None:
        if allow_infeasible and closest is not None:
            return Incumbent(closest[1], prob.objective_value(closest[1]), "stage1-infeasible")
        raise Stage1Error(f"no feasible stage-1 point in {attempts} draws")
    return best
