"""Random-substitution checks of the weighted-sum identities behind the
direction-quality lemmas.

Each check draws the free symbols (mu, gamma, beta, c, the vectors
g_{k-1}, g_k, d_{k-1} and the values f_{k-1}, f_k), evaluates the weighted
sum of constraint brackets and its completed-square form, and reports the
largest relative residual. A polynomial identity that vanishes on many random
points vanishes identically with probability one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Sample:
    mu: float
    L: float
    gamma: float
    beta: float
    c: float
    gp: np.ndarray  # g_{k-1}
    g: np.ndarray  # g_k
    dp: np.ndarray  # d_{k-1}
    fp: float
    f: float

    @property
    def q(self) -> float:
        return self.mu / self.L


def _loguniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def draw(rng: np.random.Generator, dim: int, scale: float = 1.0) -> Sample:
    L = 1.0
    mu = float(rng.uniform(0.01, 0.99)) * L
    gamma = _loguniform(rng, 0.1, 10.0)
    beta = _loguniform(rng, 0.1, 10.0)
    c = 1.0 + _loguniform(rng, 0.1, 10.0)
    gp, g, dp = (scale * rng.standard_normal(dim) for _ in range(3))
    fp, f = (scale**2 * float(rng.standard_normal()) for _ in range(2))
    return Sample(mu, L, gamma, beta, c, gp, g, dp, fp, f)


def _interp_brackets(s: Sample) -> tuple[float, float]:
    """The two interpolation brackets with x_{k-1} - x_k = gamma d_{k-1}."""
    mu, L, gam = s.mu, s.L, s.gamma
    dg = s.gp - s.g
    common = dg @ dg / (2 * L) + mu / (2 * (1 - mu / L)) * np.sum((gam * s.dp - dg / L) ** 2)
    b1 = s.f - s.fp + gam * (s.g @ s.dp) + common
    b2 = s.fp - s.f - gam * (s.gp @ s.dp) + common
    return float(b1), float(b2)


def prp_sides(s: Sample) -> tuple[float, float, float]:
    """(weighted sum, completed-square form, magnitude scale)."""
    mu, L, gam, beta, q = s.mu, s.L, s.gamma, s.beta, s.q
    gp, g, dp = s.gp, s.g, s.dp
    lam1 = -beta**2 * (q + 1) / (gam * L * q)
    lam23 = beta**2 * (q + 1) ** 2 / (gam**2 * L * (1 - q) * q)
    lam4 = beta * (q + 1) / (gam * L * q)
    b1, b2 = _interp_brackets(s)
    terms = [
        lam1 * (g @ dp),
        lam23 * b1,
        lam23 * b2,
        lam4 * (gp @ g - g @ g + beta * (gp @ dp)),
    ]
    lhs = float(sum(terms))
    d = g + beta * dp
    v = dp - (1 + q) / (2 * L * gam * q) * gp + (2 * beta * (1 + q) - L * gam * (1 - q) ** 2) / (4 * beta * L * gam * q) * g
    rterms = [d @ d, -(1 + q) ** 2 / (4 * q) * (g @ g), 4 * beta**2 * q / (1 - q) ** 2 * (v @ v)]
    rhs = float(sum(rterms))
    scale = max(sum(abs(t) for t in terms), sum(abs(t) for t in rterms), 1e-300)
    return lhs, rhs, scale


def fr_beta_sides(s: Sample) -> tuple[float, float, float]:
    mu, L, gam, beta, c = s.mu, s.L, s.gamma, s.beta, s.c
    gp, g, dp = s.gp, s.g, s.dp
    lam1 = gam * (L + mu) - 2 * math.sqrt(beta) / math.sqrt((c - 1) * c)
    lam2 = 2 / c - gam * (L + mu)
    lam3 = math.sqrt(c - 1) / math.sqrt(beta * c)
    lam4 = -(gam**2) * L * mu + math.sqrt(beta) / (c * math.sqrt((c - 1) * c))
    lam56 = L - mu
    b1, b2 = _interp_brackets(s)
    terms = [
        lam1 * (gp @ dp - gp @ gp),
        lam2 * (g @ dp),
        lam3 * (g @ g - beta * (gp @ gp)),
        lam4 * (dp @ dp - c * (gp @ gp)),
        lam56 * b1,
        lam56 * b2,
    ]
    lhs = float(sum(terms))
    coef = 2 * math.sqrt(1 - 1 / c) * math.sqrt(beta) - c * gam**2 * L * mu + gam * (L + mu) - 1
    v = (beta / ((c - 1) * c**3)) ** 0.25 * dp - (beta * c / (c - 1)) ** 0.25 * gp + ((c - 1) / (beta * c)) ** 0.25 * g
    rterms = [g @ g, -coef * (gp @ gp), v @ v]
    rhs = float(sum(rterms))
    scale = max(sum(abs(t) for t in terms), sum(abs(t) for t in rterms), 1e-300)
    return lhs, rhs, scale


def fr_direction_sides(s: Sample) -> tuple[float, float, float]:
    beta, c = s.beta, s.c
    gp, g, dp = s.gp, s.g, s.dp
    terms = [2 * beta * (dp @ g), beta**2 * (dp @ dp - c * (gp @ gp)), -c * beta * (g @ g - beta * (gp @ gp))]
    lhs = float(sum(terms))
    d = g + beta * dp
    rterms = [d @ d, -(1 + c * beta) * (g @ g)]
    rhs = float(sum(rterms))
    scale = max(sum(abs(t) for t in terms), sum(abs(t) for t in rterms), 1e-300)
    return lhs, rhs, scale


def _max_residual(sides, trials: int, dim: int, seed: int, scale: float = 1.0) -> float:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        lhs, rhs, mag = sides(draw(rng, dim, scale))
        worst = max(worst, abs(lhs - rhs) / mag)
    return worst


def verify_prp_identity(trials: int = 1000, dim: int = 2, seed: int = 0, scale: float = 1.0) -> float:
    return _max_residual(prp_sides, trials, dim, seed, scale)


def verify_fr_beta_identity(trials: int = 1000, dim: int = 2, seed: int = 0, scale: float = 1.0) -> float:
    return _max_residual(fr_beta_sides, trials, dim, seed, scale)


def verify_fr_direction_identity(trials: int = 1000, dim: int = 2, seed: int = 0, scale: float = 1.0) -> float:
    return _max_residual(fr_direction_sides, trials, dim, seed, scale)


def prp_inequality_weights(s: Sample) -> dict[str, float]:
    q = s.q
    return {
        "lambda2": s.beta**2 * (1 + q) ** 2 / (s.gamma**2 * s.L * (1 - q) * q),
        "lambda3": s.beta**2 * (1 + q) ** 2 / (s.gamma**2 * s.L * (1 - q) * q),
    }


def fr_inequality_weights(s: Sample) -> dict[str, float]:
    return {
        "lambda3": math.sqrt(s.c - 1) / math.sqrt(s.beta * s.c),
        "lambda5": s.L - s.mu,
        "lambda6": s.L - s.mu,
    }


def verify_sign_conditions(trials: int = 1000, dim: int = 2, seed: int = 0) -> dict[str, dict]:
    """Nonnegativity of the multipliers attached to inequality constraints.

    Samples draw ``beta > 0`` (the FR weight ``lambda3`` is real only then);
    the report records the smallest value seen for every weight.
    """
    rng = np.random.default_rng(seed)
    mins: dict[str, float] = {}
    for _ in range(trials):
        s = draw(rng, dim)
        for lemma, w in (("prp", prp_inequality_weights(s)), ("fr_beta", fr_inequality_weights(s))):
            for k, v in w.items():
                key = f"{lemma}.{k}"
                mins[key] = min(mins.get(key, math.inf), v)
    return {
        "min_weight": mins,
        "all_nonnegative": all(v >= 0 for v in mins.values()),
        "beta_domain": "beta > 0 (FR lambda3 requires it)",
    }
