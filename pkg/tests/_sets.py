"""Random interpolable triplet sets, sampled from explicit members of F_{mu,L}."""

import numpy as np

from ncgpep.function_model import ClassParams, TripletSet


def logcosh_function(rng: np.random.Generator, dim: int, p: ClassParams, m: int = 6):
    """``mu/2 ||x||^2 + (L - mu) sum_i log cosh(a_i^T x - b_i)`` with ``sum a_i a_i^T <= I``."""
    A = rng.standard_normal((m, dim))
    A /= np.linalg.norm(A, 2)
    b = rng.standard_normal(m)
    k = p.L - p.mu

    def f(x):
        z = A @ x - b
        val = 0.5 * p.mu * x @ x + k * np.sum(np.logaddexp(z, -z) - np.log(2.0))
        return float(val), p.mu * x + k * A.T @ np.tanh(z)

    return f


def random_set(rng: np.random.Generator, dim: int, n: int, p: ClassParams, scale: float = 2.0) -> TripletSet:
    f = logcosh_function(rng, dim, p)
    X = scale * rng.standard_normal((n, dim))
    vals = [f(x) for x in X]
    return TripletSet.from_arrays(X, [g for _, g in vals], [v for v, _ in vals])
