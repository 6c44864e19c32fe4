import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _sets import logcosh_function
from ncgpep.bounds import asd_rate, epsilon_from_c
from ncgpep.function_model import ClassParams, quadratic_oracle
from ncgpep.ncgm import MethodConfig, beta_update, direction_quality, infer_initial_direction, run
from ncgpep.solver.stage1 import random_quadratic


def _quad(seed, dim, q):
    rng = np.random.default_rng(seed)
    A = random_quadratic(rng, dim, q, 1.0)
    return quadratic_oracle(A), rng.standard_normal(dim)


def test_beta_rules():
    g, gn = np.array([1.0, 0.0]), np.array([0.5, 0.5])
    assert beta_update(gn, g, 0.0) == pytest.approx(0.5)
    assert beta_update(gn, g, 1.0) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        MethodConfig("XYZ")
    with pytest.raises(ValueError):
        MethodConfig("FIXED", max_iters=3, fixed_betas=[0.1])


@pytest.mark.parametrize("rule", ["PRP", "FR", "GDEL"])
def test_line_search_identities(rule):
    # fewer steps than the dimension: finite termination would leave only round-off
    f, x0 = _quad(1, 20, 0.1)
    tr = run(f, x0, MethodConfig(rule, max_iters=5))
    res = tr.identity_residuals()
    assert max(res.values()) <= 1e-6
    assert all(np.diff(tr.f) <= 1e-12)
    if rule == "GDEL":
        assert tr.beta == [0.0] * len(tr.beta)


def test_fixed_rule_uses_given_parameters():
    f, x0 = _quad(2, 4, 0.2)
    tr = run(f, x0, MethodConfig.fixed([0.3, 0.1]))
    assert tr.beta == [0.3, 0.1]
    assert len(tr.x) == 4  # three steps, two parameter updates


def test_stops_at_stationary_point():
    f = quadratic_oracle(np.eye(2))
    tr = run(f, np.array([1.0, 1.0]), MethodConfig("PRP", max_iters=5))
    assert tr.stopped == "gradient"
    assert len(tr.x) == 2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.9), st.booleans())
def test_prp_direction_quality_bound(seed, q, smooth):
    # on any member of the class, PRP keeps ||d||^2 / ||g||^2 <= (1+q)^2/(4q)
    p = ClassParams.from_q(q)
    rng = np.random.default_rng(seed)
    f = logcosh_function(rng, 5, p) if smooth else quadratic_oracle(random_quadratic(rng, 5, q, 1.0))
    tr = run(f, 3.0 * rng.standard_normal(5), MethodConfig("PRP", max_iters=6))
    for k in range(len(tr.d)):
        assert direction_quality(tr, k)[0] <= (1 + q) ** 2 / (4 * q) * (1 + 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.9))
def test_one_step_rate_within_quality_bound(seed, q):
    f, x0 = _quad(seed, 5, q)
    tr = run(f, x0, MethodConfig("PRP", max_iters=4))
    for k in range(len(tr.d)):
        if k + 1 >= len(tr.f):
            break
        c, eps = direction_quality(tr, k)
        assert tr.f[k + 1] <= asd_rate(q, eps) * tr.f[k] * (1 + 1e-6) + 1e-14


def test_infer_initial_direction():
    f, x0 = _quad(3, 4, 0.3)
    g0 = f(x0)[1]
    d0 = np.array([1.0, 2.0, 0.5, -0.2]) + g0
    x1 = x0 - 0.7 * d0
    d = infer_initial_direction(x0, x1, g0)
    assert d @ g0 == pytest.approx(g0 @ g0)
    assert np.allclose(d / np.linalg.norm(d), d0 / np.linalg.norm(d0))
    with pytest.raises(ValueError):
        infer_initial_direction(x0, x0 + g0, g0)


def test_trace_csv_columns():
    f, x0 = _quad(4, 3, 0.5)
    text = run(f, x0, MethodConfig("FR", max_iters=3)).to_csv()
    assert text.splitlines()[0] == "k,f_k,norm_g_k,gamma_k,beta_k,c_k,sin_theta_k"
    assert len(text.splitlines()) == 5
