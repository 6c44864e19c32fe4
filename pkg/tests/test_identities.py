import numpy as np
import pytest

from ncgpep import identities as idn

CHECKS = [idn.verify_prp_identity, idn.verify_fr_beta_identity, idn.verify_fr_direction_identity]


@pytest.mark.parametrize("check", CHECKS, ids=["prp", "fr_beta", "fr_direction"])
@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
def test_identity_is_scale_free(check, scale):
    assert check(200, 3, seed=7, scale=scale) <= 1e-9


def test_perturbed_bracket_breaks_identities(monkeypatch):
    # the checks are not vacuous: a wrong constraint bracket is detected
    orig = idn._interp_brackets
    monkeypatch.setattr(idn, "_interp_brackets", lambda s: tuple(1.01 * b for b in orig(s)))
    assert idn.verify_prp_identity(50, 2) > 1e-6
    assert idn.verify_fr_beta_identity(50, 2) > 1e-6


def test_direction_identity_detects_wrong_quality():
    rng = np.random.default_rng(3)
    s = idn.draw(rng, 2)
    lhs, rhs, mag = idn.fr_direction_sides(s)
    s.c *= 1.5
    lhs2, _, _ = idn.fr_direction_sides(s)
    assert abs(lhs2 - rhs) / mag > 1e-6


def test_sign_conditions_nonnegative():
    out = idn.verify_sign_conditions(300, 2, seed=1)
    assert out["all_nonnegative"]
    assert set(out["min_weight"]) == {"prp.lambda2", "prp.lambda3", "fr_beta.lambda3", "fr_beta.lambda5",
                                      "fr_beta.lambda6"}


def test_trials_must_be_positive():
    with pytest.raises(ValueError):
        idn.verify_prp_identity(0)
