import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgpep.function_model import ClassParams
from ncgpep.pep.builders import (
    build_direction_pep,
    build_exact_upper,
    build_lower_fixed_beta,
    build_lyapunov_upper,
    problem_basis,
)
from ncgpep.pep.qcqp import QcqpProblem
from ncgpep.pep.scaled import scaled_from_direction, to_direction, to_scaled
from ncgpep.pep.selectors import DataMatrices, ordered_pairs
from ncgpep.solver.stage1 import sample_point, stage1_feasible

P = ClassParams.from_q(0.3)


def _problems():
    return [
        build_direction_pep(1, P, 2.0),
        build_lyapunov_upper(1, P, 2.0, 2),
        build_exact_upper(0, P, 2),
        build_lower_fixed_beta(1, P, 2.0, 2, [0.4]),
    ]


@pytest.mark.parametrize("prob", _problems(), ids=lambda p: p.name)
def test_selector_algebra_matches_vectors(prob):
    rng = np.random.default_rng(0)
    z = sample_point(prob, rng)
    G = prob.gram_matrix(z)
    w, V = np.linalg.eigh(G)
    H = np.sqrt(np.clip(w, 0, None))[:, None] * V.T
    b = problem_basis(prob)
    dm = DataMatrices(b)
    x = {k: H @ b.x[k].evaluate(z) for k in b.labels}
    g = {k: H @ b.g[k].evaluate(z) for k in b.labels}
    tr = lambda M: float(np.sum(G * M.evaluate(z)))  # noqa: E731
    scale = max(1.0, float(np.abs(G).max()))
    for i, j in ordered_pairs(b.labels):
        assert tr(dm.A(i, j)) == pytest.approx(g[j] @ (x[i] - x[j]), abs=1e-9 * scale)
        assert tr(dm.B(i, j)) == pytest.approx((x[i] - x[j]) @ (x[i] - x[j]), abs=1e-9 * scale)
        assert tr(dm.C(i, j)) == pytest.approx((g[i] - g[j]) @ (g[i] - g[j]), abs=1e-9 * scale)
        assert tr(dm.D(i, j)) == pytest.approx(g[i] @ g[j], abs=1e-9 * scale)
        assert tr(dm.E(i, j)) == pytest.approx((g[i] - g[j]) @ (x[i] - x[j]), abs=1e-9 * scale)
    for k in b.d:
        d = H @ b.d[k].evaluate(z)
        assert tr(dm.Ct_star(k)) == pytest.approx(d @ d, abs=1e-9 * scale)
        assert tr(dm.Dt(k, k)) == pytest.approx(g[k] @ d, abs=1e-9 * scale)


def test_direction_constraint_list():
    prob = build_direction_pep(1, P, 10.0)
    tags = prob.tags()
    assert sum(t.startswith("interpolation") for t in tags) == 2
    for t in ("<g[-1],d[-1]> = ||g[-1]||^2", "<g[0],d[-1]> = 0", "<g[0],x[-1]-x[0]> = 0",
              "beta definition(-1)", "direction quality(-1)", "normalization ||g[0]||^2 = 1"):
        assert t in tags
    assert prob.gram_size == 4
    assert [c.sense for c in prob.constraints if c.tag == "direction quality(-1)"] == ["<="]
    eq = build_direction_pep(1, P, 10.0, coupling="==")
    assert [c.sense for c in eq.constraints if c.tag == "direction quality(-1)"] == ["=="]


@pytest.mark.parametrize("N", [1, 2, 3])
def test_lyapunov_interpolation_count(N):
    prob = build_lyapunov_upper(1, P, 2.0, N)
    assert sum(t.startswith("interpolation") for t in prob.tags()) == (N + 2) * (N + 1)
    assert prob.gram_size == 2 * N + 3


def test_exact_upper_drops_quality_constraint():
    prob = build_exact_upper(1, P, 2)
    assert not any(t.startswith("direction quality") for t in prob.tags())


def test_lower_without_parameters_has_no_beta():
    prob = build_lower_fixed_beta(1, P, None, 1, [])
    assert not any(v.kind == "beta" for v in prob.variables)
    with pytest.raises(ValueError):
        build_lower_fixed_beta(1, P, None, 2, [])


def test_builders_reject_bad_input():
    with pytest.raises(ValueError):
        build_direction_pep(2, P, 2.0)
    with pytest.raises(ValueError):
        build_direction_pep(1, P, 0.5)
    with pytest.raises(ValueError):
        build_lyapunov_upper(1, P, 2.0, 0)


@pytest.mark.parametrize("prob", _problems()[:3], ids=lambda p: p.name)
def test_homogeneity(prob):
    inc = stage1_feasible(prob, seed=1)
    z = inc.z.copy()
    t = 1.7
    kinds = prob.kinds()
    z[(kinds == "G") | (kinds == "F")] *= t * t
    z[kinds == "H"] *= t
    for c in prob.constraints:
        if c.tag.startswith("normalization"):
            continue
        assert c.violation(z) <= 1e-8 * t * t * max(1.0, abs(c.expr.value(inc.z)))


def test_json_round_trip():
    prob = build_lyapunov_upper(0, P, 3.0, 2)
    back = QcqpProblem.from_json(prob.to_json())
    assert back.tags() == prob.tags()
    z = stage1_feasible(prob, seed=2).z
    assert back.objective_value(z) == pytest.approx(prob.objective_value(z))
    assert back.max_violation(z) == pytest.approx(prob.max_violation(z), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0, 1]), st.floats(0.05, 0.9), st.floats(1.01, 50.0))
def test_scaled_form_is_equivalent(seed, eta, q, c):
    D = build_direction_pep(eta, ClassParams.from_q(q), c)
    E = scaled_from_direction(D)
    z = stage1_feasible(D, seed=seed).z
    zE = to_scaled(D, E, z)
    zD = to_direction(E, D, zE)
    scale = max(1.0, D.objective_value(z))
    assert E.objective_value(zE) == pytest.approx(D.objective_value(z), rel=1e-9)
    assert E.max_violation(zE) <= 1e-7 * scale
    assert D.max_violation(zD) <= 1e-7 * scale
    assert zD[D.var("beta[-1]")] == pytest.approx(z[D.var("beta[-1]")], rel=1e-9, abs=1e-12)
