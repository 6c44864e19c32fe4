import pytest

from ncgpep.counterexample import extract_triplets, load_example1, replay, validate_counterexample
from ncgpep.function_model import ClassParams, check_interpolable
from ncgpep.experiments import _upper_point
from ncgpep.bounds import gdel_rate
from ncgpep.pep.builders import build_exact_upper, build_lyapunov_upper
from ncgpep.solver.bnb import SolverOptions, solve
from ncgpep.solver.stage1 import stage1_feasible


def test_fixture_replay_and_residual_report():
    S, p = load_example1()
    assert (p.mu, p.L) == (0.5, 1.0)
    v = validate_counterexample(S, p, "PRP", 2)
    assert not v.ok and "not interpolable" in v.message
    assert -1e-5 < v.min_residual < -1e-6
    v = validate_counterexample(S, p, "PRP", 2, tol=1e-5)
    assert v.ok
    assert v.replay_f == pytest.approx([1.0, 0.267353, 0.056104], abs=1e-3)


def test_extracted_set_is_interpolable():
    prob = build_lyapunov_upper(1, ClassParams.from_q(0.4), 2.0, 1)
    z = stage1_feasible(prob, seed=0).z
    S = extract_triplets(prob, z)
    assert S.dim <= prob.gram_size
    assert check_interpolable(S, ClassParams.from_q(0.4)) >= -1e-7
    assert set(S.labels) >= {"0", "1", "*"}


def test_solution_replays_to_its_value():
    # the worst case of one exact steepest-descent step reproduces under replay
    q = 0.4
    prob = build_exact_upper(0, ClassParams.from_q(q), 1)
    rep = solve(prob, SolverOptions(max_time=60.0))
    z = _upper_point(prob, rep)
    S = extract_triplets(prob, z)
    tr = replay(S, ClassParams.from_q(q), "GDEL", 1, d0="gradient")
    fs = S["*"].f
    assert (tr.f[1] - fs) / (tr.f[0] - fs) == pytest.approx(rep.incumbent_value, rel=1e-6)
    assert rep.incumbent_value == pytest.approx(gdel_rate(q), rel=1e-6)


def test_replay_rejects_unknown_start_rule():
    S, p = load_example1()
    with pytest.raises(ValueError):
        replay(S, p, "PRP", 1, d0="guess")
