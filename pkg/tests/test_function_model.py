import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _sets import logcosh_function, random_set
from ncgpep.function_model import (
    ClassParams,
    Extension,
    LineSearchError,
    TripletSet,
    check_interpolable,
    exact_line_search,
    interpolation_residuals,
    load_triplets,
    quadratic_oracle,
    save_triplets,
)


def test_class_params_validation():
    assert ClassParams.from_q(0.25, L=2.0).mu == 0.5
    with pytest.raises(ValueError):
        ClassParams(1.0, 1.0)
    with pytest.raises(ValueError):
        ClassParams(-0.1)


def test_triplet_set_validation():
    with pytest.raises(ValueError):
        TripletSet.from_arrays([[0.0], [1.0, 2.0]], [[0.0], [1.0, 2.0]], [0.0, 1.0])
    with pytest.raises(ValueError):
        TripletSet.from_arrays([[0.0], [1.0]], [[0.0], [1.0]], [0.0, 1.0], ["a", "a"])
    with pytest.raises(ValueError):
        TripletSet.from_json_dict({"mu": 0.1, "L": 1.0})


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(0.05, 0.9))
def test_sampled_sets_are_interpolable(seed, dim, q):
    p = ClassParams.from_q(q)
    S = random_set(np.random.default_rng(seed), dim, 5, p)
    assert check_interpolable(S, p) >= -1e-10


def test_residual_detects_non_interpolable_pair():
    p = ClassParams(0.1, 1.0)
    # gradient of norm 5 at points 0.1 apart violates L-smoothness
    S = TripletSet.from_arrays([[0.0], [0.1]], [[0.0], [5.0]], [0.0, 0.0])
    r = interpolation_residuals(S, p)
    assert r.min() < 0
    with pytest.raises(ValueError, match="not interpolable"):
        check_interpolable(S, p)


def test_quadratic_residual_matches_closed_form():
    # one-dimensional quadratic with curvature L: the (i, j) slack is zero
    p = ClassParams(0.2, 1.0)
    xs = np.array([[0.0], [1.5]])
    S = TripletSet.from_arrays(xs, xs * 1.0, 0.5 * xs[:, 0] ** 2)
    assert np.allclose(interpolation_residuals(S, p), 0.0, atol=1e-14)


def test_extension_of_quadratic_is_itself():
    rng = np.random.default_rng(5)
    p = ClassParams(0.3, 1.0)
    A = np.diag([0.3, 0.6, 1.0])
    f = quadratic_oracle(A)
    X = rng.standard_normal((6, 3))
    S = TripletSet.from_arrays(X, [f(x)[1] for x in X], [f(x)[0] for x in X])
    ext = Extension(S, p)
    for y in rng.standard_normal((5, 3)):
        v, g = ext(y)
        # the extension is the smallest member of the class: below f, equal at data
        assert v <= f(y)[0] + 1e-9
    for x in X:
        v, g = ext(x)
        assert v == pytest.approx(f(x)[0], abs=1e-9)


def test_json_round_trip(tmp_path):
    p = ClassParams(0.1, 2.0)
    S = random_set(np.random.default_rng(2), 3, 4, p)
    path = tmp_path / "s.json"
    save_triplets(path, S, p)
    S2, p2 = load_triplets(path)
    assert p2 == p and S2.labels == S.labels
    assert np.array_equal(S2.X, S.X) and np.array_equal(S2.F, S.F)
    assert json.loads(path.read_text())["L"] == 2.0


def test_line_search_on_quadratic_matches_closed_form():
    A = np.diag([0.1, 1.0])
    f = quadratic_oracle(A)
    x = np.array([1.0, 1.0])
    d = f(x)[1]
    gam, x1 = exact_line_search(f, x, d)
    assert gam == pytest.approx(float(d @ d) / float(d @ A @ d), rel=1e-7)
    assert abs(f(x1)[1] @ d) <= 1e-7 * np.linalg.norm(d) * np.linalg.norm(f(x1)[1]) + 1e-12
    with pytest.raises(LineSearchError):
        exact_line_search(f, x, -d)


def test_line_search_on_nonquadratic():
    p = ClassParams(0.1, 1.0)
    f = logcosh_function(np.random.default_rng(9), 3, p)
    x = np.array([3.0, -2.0, 1.0])
    d = f(x)[1]
    gam, x1 = exact_line_search(f, x, d)
    assert gam > 0
    assert f(x1)[0] < f(x)[0]


def test_extension_converges_on_degenerate_set():
    # one-step steepest-descent worst case: zero gradient at the minimizer and nearly parallel
    # columns, where plain Frank-Wolfe zigzags
    p = ClassParams.from_q(0.4)
    S = TripletSet.from_arrays(
        [[0.0, 0.0], [0.13387898, -2.03100273], [0.6418708, -0.59079059]],
        [[0.0, 0.0], [-0.35556721, -1.00817341], [0.43209552, -0.15240879]],
        [0.0, 1.0, 0.1836956], ["*", "0", "1"])
    ext = Extension(S, p, check=False, max_iter=2000)
    r = ext.solve(np.array([0.48944619, -1.02282932]))
    assert r.gap <= 1e-9
