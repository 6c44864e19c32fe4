import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncgpep.bounds import asd_rate, epsilon_from_c, gdel_rate
from ncgpep.function_model import ClassParams
from ncgpep.pep.builders import build_direction_pep, build_exact_upper, build_lyapunov_upper
from ncgpep.solver.bnb import SolverOptions, double_heuristic_boxes, heuristic_contacts, solve
from ncgpep.solver.fbbt import Infeasible, Propagator
from ncgpep.solver.local import stage2_local
from ncgpep.solver.report import SolveReport, relative_gap
from ncgpep.solver.stage1 import stage1_feasible

FAST = SolverOptions(max_time=60.0)


def test_relative_gap():
    assert relative_gap(2.0, 1.0) == 0.5
    assert relative_gap(1.0, 1.0) == 0.0


@pytest.mark.parametrize("q", [0.2, 0.6])
def test_one_step_exact_is_gdel(q):
    rep = solve(build_exact_upper(1, ClassParams.from_q(q), 1), FAST)
    assert rep.incumbent_value <= rep.upper_bound + 1e-12
    assert rep.upper_bound == pytest.approx(gdel_rate(q), rel=1e-3)
    assert rep.termination == "gap"


def test_one_step_lyapunov_is_inexact_steepest_descent():
    q, c = 0.4, 2.0
    rep = solve(build_lyapunov_upper(0, ClassParams.from_q(q), c, 1), FAST)
    assert rep.upper_bound == pytest.approx(asd_rate(q, epsilon_from_c(c)), rel=1e-3)


def test_direction_pep_prp_half():
    rep = solve(build_direction_pep(1, ClassParams.from_q(0.5), 10.0), FAST)
    assert rep.incumbent_value <= rep.upper_bound
    assert rep.upper_bound == pytest.approx(1.125, rel=1e-3)
    assert rep.max_violation <= 1e-7
    assert rep.extra["bounded_as"].startswith("direction-scaled")


def test_report_is_reproducible_and_round_trips():
    prob = build_lyapunov_upper(1, ClassParams.from_q(0.5), 1.125, 1)
    a = solve(prob, SolverOptions(seed=5)).to_json()
    b = solve(prob, SolverOptions(seed=5)).to_json()
    assert a == b
    d = json.loads(a)
    assert "wall_time" not in d
    rep = SolveReport.from_dict(d)
    assert rep.to_json() == a
    assert "wall_time" in json.loads(rep.to_json(timing=True))
    with pytest.raises(ValueError):
        SolveReport.from_dict({"format": "other"})


def test_budget_limited_bound_still_valid():
    prob = build_direction_pep(1, ClassParams.from_q(0.1), 10.0)
    rep = solve(prob, SolverOptions(max_nodes=5))
    assert rep.termination.startswith("nodes")
    assert rep.incumbent_value <= rep.upper_bound
    assert rep.upper_bound >= 3.025 * (1 - 1e-9)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 100), st.floats(0.1, 0.9), st.floats(1.01, 20.0))
def test_incumbent_never_exceeds_bound(seed, q, c):
    rep = solve(build_direction_pep(0, ClassParams.from_q(q), c), SolverOptions(seed=seed, max_nodes=30))
    assert rep.incumbent_value <= rep.upper_bound + 1e-9 * max(1.0, rep.upper_bound)


def test_stage2_does_not_lose_feasibility():
    prob = build_lyapunov_upper(1, ClassParams.from_q(0.3), 2.0, 2)
    inc = stage1_feasible(prob, seed=0)
    out = stage2_local(prob, inc)
    assert out.value >= inc.value - 1e-12
    assert prob.max_violation(out.z) <= 1e-7


def test_propagation_keeps_feasible_points():
    prob = build_direction_pep(1, ClassParams.from_q(0.3), 4.0)
    inc = stage1_feasible(prob, seed=3)
    lb, ub = prob.bounds()
    lb2, ub2 = Propagator(prob).run(lb, ub)
    z = inc.z
    keep = np.isfinite(lb2) | np.isfinite(ub2)
    assert np.all(z[keep] >= lb2[keep] - 1e-7) and np.all(z[keep] <= ub2[keep] + 1e-7)
    with pytest.raises(Infeasible):
        Propagator(prob).run(lb, ub, cutoff=(prob.objective, 1e9))


def test_heuristic_boxes_double():
    prob = build_direction_pep(1, ClassParams.from_q(0.3), 4.0)
    big = double_heuristic_boxes(prob)
    assert big.meta["gram_cap"] == 2 * prob.meta["gram_cap"]
    k = int(prob.gram_index[1, 1])
    assert big.variables[k].ub == 2 * prob.variables[k].ub
    assert big.variables[k].lb == prob.variables[k].lb  # the valid lower box stays
    z = np.zeros(prob.n_vars)
    z[k] = prob.variables[k].ub
    assert prob.variables[k].name in heuristic_contacts(prob, z)
