import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgpep import bounds

qs = st.floats(min_value=1e-4, max_value=0.999)


def test_frozen_values_at_half():
    # hand arithmetic at q = 1/2
    assert bounds.gdel_rate(0.5) == pytest.approx(1 / 9, abs=1e-15)
    assert bounds.prp_rate(0.5) == pytest.approx(0.36, abs=1e-15)
    assert bounds.polyak_rate(0.5) == pytest.approx(0.9, abs=1e-15)
    assert bounds.lower_complexity_rate(0.25) == pytest.approx(0.25, abs=1e-15)
    assert bounds.fr_rate(0.5, 1) == pytest.approx(0.36, abs=1e-14)


def test_endpoints():
    assert bounds.gdel_rate(1.0) == 0.0
    assert bounds.prp_rate(0.0) == 1.0
    assert bounds.lower_complexity_rate(0.0) == 1.0
    with pytest.raises(ValueError):
        bounds.gdel_rate(1.5)
    with pytest.raises(ValueError):
        bounds.prp_direction_bound(0.0)
    with pytest.raises(ValueError):
        bounds.epsilon_from_c(0.5)
    with pytest.raises(ValueError):
        bounds.fr_beta_bound(0.5, 1.0)
    with pytest.raises(ValueError):
        bounds.fr_epsilon(0.5, 2, "other")


@given(qs)
def test_prp_rate_is_steepest_descent_with_prp_quality(q):
    c, eps = bounds.prp_direction_bound(q)
    assert eps == pytest.approx(bounds.epsilon_from_c(c), rel=1e-9, abs=1e-12)
    assert bounds.prp_rate(q) == pytest.approx(bounds.asd_rate(q, eps), rel=1e-9, abs=1e-14)


@given(qs)
def test_asd_without_error_is_gdel(q):
    assert bounds.asd_rate(q, 0.0) == pytest.approx(bounds.gdel_rate(q), rel=1e-12, abs=1e-15)


@given(qs)
def test_fr_recursion_from_gradient_matches_prp_quality(q):
    # d_0 = g_0 gives c_0 = 1, and one FR step reaches (1+q)^2/(4q)
    c1, _ = bounds.fr_direction_recursion(q, 1.0)
    assert c1 == pytest.approx((1 + q) ** 2 / (4 * q), rel=1e-12)


@given(qs, st.floats(min_value=1.0, max_value=100.0), st.floats(min_value=0.0, max_value=10.0))
def test_fr_recursion_monotone_in_previous_quality(q, c, dc):
    assert bounds.fr_direction_recursion(q, c + dc)[0] >= bounds.fr_direction_recursion(q, c)[0] - 1e-12


@given(qs, st.integers(min_value=1, max_value=50))
def test_statement_variant_lags_proof_by_one(q, k):
    assert bounds.fr_epsilon(q, k, "statement") == pytest.approx(bounds.fr_epsilon(q, k - 1, "proof"))


@given(qs)
def test_all_rates_in_unit_interval(q):
    for r in (bounds.gdel_rate(q), bounds.prp_rate(q), bounds.polyak_rate(q), bounds.fr_rate(q, 3),
              bounds.lower_complexity_rate(q)):
        assert 0.0 <= r <= 1.0


def test_bounds_row_layout():
    row = bounds.bounds_row(0.5)
    assert len(row) == len(bounds.BOUNDS_HEADER)
    assert row[0] == 0.5
    assert bounds.bounds_row(0.0)[4] == 1.0


@settings(max_examples=30)
@given(qs)
def test_fr_rate_nondecreasing_and_tends_to_one(q):
    rates = [bounds.fr_rate(q, k) for k in range(0, 60)]
    assert np.all(np.diff(rates) >= -1e-15)
    assert bounds.fr_rate(q, 10**7) == pytest.approx(1.0, abs=1e-6)
    assert math.isclose(rates[0], bounds.gdel_rate(q), rel_tol=1e-12)
