import numpy as np
import pytest

from ncgpep.function_model import ClassParams
from ncgpep.pep.builders import build_direction_pep, build_lyapunov_upper
from ncgpep.pep.scaled import scaled_from_direction
from ncgpep.solver.relax import Cut, Relaxation, separate_psd_cut, seed_cuts
from ncgpep.solver.stage1 import stage1_feasible

D = build_direction_pep(1, ClassParams.from_q(0.3), 4.0)
PROBLEMS = [D, scaled_from_direction(D), build_lyapunov_upper(0, ClassParams.from_q(0.3), 2.0, 2)]


def _random_lifted(rel, rng):
    """Problem point with a random PSD Gram matrix and scalars inside their boxes."""
    prob = rel.prob
    lb, ub = prob.bounds()
    n = prob.gram_size
    M = rng.standard_normal((n, n + 2))
    G = M @ M.T * rng.uniform(0.01, 3.0)
    z = np.zeros(prob.n_vars)
    prob.set_gram(z, G)
    for i, v in enumerate(prob.variables):
        if v.kind not in ("G", "H", "F") and i not in prob.definitions:
            z[i] = rng.uniform(lb[i], ub[i])
    z = prob.complete(z)
    return rel.lift_point(z)


@pytest.fixture(scope="module", params=PROBLEMS, ids=lambda p: p.name)
def relaxed(request):
    prob = request.param
    rel = Relaxation(prob)
    lb, ub = prob.bounds()
    r = rel.evaluate(lb, ub, max_rounds=25)
    inc = stage1_feasible(prob, seed=0)
    cuts = list(r.active) + seed_cuts(rel, inc.z, np.random.default_rng(0), n_random=5)
    return rel, cuts, inc


def test_cut_families_valid_on_random_psd_points(relaxed):
    rel, cuts, _ = relaxed
    assert cuts
    lb, ub = rel.prob.bounds()
    A, b, kept = rel.cut_rows(cuts, lb, ub)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = _random_lifted(rel, rng)
        scale = max(1.0, float(np.abs(x).max()))
        assert np.max(A @ x - b) <= 1e-9 * scale


def test_equality_rows_hold_at_feasible_point(relaxed):
    # linearized constraints and every RLT product row are exact at a real point
    rel, _, inc = relaxed
    x = rel.lift_point(inc.z)
    scale = max(1.0, float(np.abs(x).max()))
    assert np.max(np.abs(rel.A_eq @ x - rel.b_eq)) <= 1e-7 * scale
    lb, ub = rel.prob.bounds()
    assert rel.row_residuals(x, lb, ub) <= 1e-7 * scale


def test_relaxation_bounds_incumbent(relaxed):
    rel, _, inc = relaxed
    lb, ub = rel.prob.bounds()
    r = rel.evaluate(lb, ub, max_rounds=10)
    assert r.bound >= inc.value - 1e-7 * max(1.0, abs(inc.value))


def test_separate_psd_cut():
    G = np.diag([1.0, -0.5, 2.0])
    cut = separate_psd_cut(G)
    u = np.array(cut.u)
    assert u @ G @ u == pytest.approx(-0.5)
    assert separate_psd_cut(np.eye(3)) is None
    with pytest.raises(ValueError):
        separate_psd_cut(np.ones(3))


def test_kron_cut_rows_match_block_matrix():
    rel = Relaxation(PROBLEMS[1])
    t, s = rel.sq_defs[0]
    m = len(rel.rows)
    rng = np.random.default_rng(4)
    u = rng.standard_normal(2 * m)
    cut = Cut("kron", tuple(u), t=t, s=s)
    x = rng.standard_normal(rel.ncol)
    lb, ub = rel.prob.bounds()
    A, b, _ = rel.cut_rows([cut], lb, ub)
    mats = rel.matrices(x)
    M = np.block([[mats[None], mats[s]], [mats[s], mats[t]]])
    assert float(-(A @ x)[0]) == pytest.approx(float(u @ M @ u), rel=1e-12, abs=1e-12)
