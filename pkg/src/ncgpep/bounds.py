"""Closed-form rates and direction-quality bounds."""

from __future__ import annotations

import math

import numpy as np

Q_GRID = np.round(0.005 * np.arange(1, 200), 12)


def _check_q(q: float, *, allow_zero: bool = True, allow_one: bool = True) -> float:
    q = float(q)
    if not (0.0 <= q <= 1.0) or (q == 0.0 and not allow_zero) or (q == 1.0 and not allow_one):
        raise ValueError(f"q out of range: {q}")
    return q


def gdel_rate(q: float) -> float:
    q = _check_q(q)
    return ((1.0 - q) / (1.0 + q)) ** 2


def asd_rate(q: float, epsilon: float) -> float:
    """Rate of steepest descent along a direction with relative error ``epsilon``."""
    q = _check_q(q)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    qe = q * (1.0 - epsilon) / (1.0 + epsilon)
    return ((1.0 - qe) / (1.0 + qe)) ** 2


def epsilon_from_c(c: float) -> float:
    """Sine bound sqrt(1 - 1/c) of a direction of quality c."""
    if c < 1.0:
        raise ValueError("c must be >= 1")
    return math.sqrt(1.0 - 1.0 / c)


def prp_direction_bound(q: float) -> tuple[float, float]:
    """``(c, epsilon)`` with ``c = (1+q)^2/(4q)`` and ``epsilon = (1-q)/(1+q)``."""
    q = _check_q(q, allow_zero=False)
    return (1.0 + q) ** 2 / (4.0 * q), (1.0 - q) / (1.0 + q)


def prp_rate(q: float) -> float:
    q = _check_q(q)
    return ((1.0 - q * q) / (1.0 + q * q)) ** 2


def polyak_rate(q: float) -> float:
    q = _check_q(q)
    return 1.0 - q**3 / (1.0 + q * q)


def fr_beta_bound(q: float, c_prev: float) -> float:
    q = _check_q(q, allow_zero=False)
    if c_prev <= 1.0:
        raise ValueError("the FR parameter bound needs c_prev > 1")
    return (1.0 - q + 2.0 * math.sqrt((c_prev - 1.0) * q)) ** 2 / (4.0 * q * c_prev)


def fr_direction_recursion(q: float, c_prev: float) -> tuple[float, float]:
    """``(c_k, epsilon_k)`` from the previous quality ``c_prev >= 1``."""
    q = _check_q(q, allow_zero=False)
    if c_prev < 1.0:
        raise ValueError("c_prev must be >= 1")
    c = 1.0 + (1.0 - q + 2.0 * math.sqrt((c_prev - 1.0) * q)) ** 2 / (4.0 * q)
    return c, epsilon_from_c(c)


def fr_epsilon(q: float, k: int, variant: str = "proof") -> float:
    """Direction error after ``k`` FR steps from d_0 = g_0.

    ``variant="proof"`` uses ``c_k <= 1 + k^2 (1-q)^2/(4q)``;
    ``variant="statement"`` uses ``(k-1)^2`` in place of ``k^2``.
    """
    q = _check_q(q, allow_zero=False)
    if k < 0:
        raise ValueError("k must be >= 0")
    if variant == "proof":
        m = k
    elif variant == "statement":
        m = max(k - 1, 0)
    else:
        raise ValueError("variant must be 'proof' or 'statement'")
    t = (1.0 - q) ** 2 * m * m
    return math.sqrt(t / (4.0 * q + t))


def fr_rate(q: float, k: int, variant: str = "proof") -> float:
    return asd_rate(q, fr_epsilon(q, k, variant))


def lower_complexity_rate(q: float) -> float:
    q = _check_q(q)
    return (1.0 - math.sqrt(q)) ** 2


BOUNDS_HEADER = ["q", "gdel", "prp", "polyak", "fr", "lower"]


def bounds_row(q: float, k: int = 1, variant: str = "proof") -> list[float]:
    fr = fr_rate(q, k, variant) if q > 0 else 1.0
    return [q, gdel_rate(q), prp_rate(q), polyak_rate(q), fr, lower_complexity_rate(q)]
