import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhpemm.merit import neighborhood_contains, rho_radius
from rhpemm.problems import PrimalDual, builtin_problem
from rhpemm.solver import (AlreadyOptimal, SolverConfig, SolverState, complexity_budget,
                           derive_relaxation, initial_lambda, run, step, trace_to_csv,
                           trace_to_json)

from conftest import scalar_program


def test_relaxation_reference_values():
    h, tau = derive_relaxation(0.5, 0.25)
    assert h == pytest.approx(0.2604698372480776, rel=1e-13)
    assert tau == pytest.approx(0.20664503786679156, rel=1e-13)
    assert (1 + h) * (1 + 3 * h) ** 2 == pytest.approx(4.0, abs=4e-12)


@settings(max_examples=100, deadline=None)
@given(sigma=st.floats(0.01, 0.99), theta=st.floats(1e-4, 0.25))
def test_relaxation_solves_its_equation(sigma, theta):
    h, tau = derive_relaxation(sigma, theta)
    assert h > 0 and 0 < tau < 1
    assert theta * (1 + h) * (1 + h * (1 + 1 / sigma)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_relaxation_decreases_in_theta():
    hs = [derive_relaxation(0.5, t)[0] for t in np.linspace(0.01, 0.25, 25)]
    assert all(a > b for a, b in zip(hs, hs[1:]))


def test_initial_lambda_closed_form():
    # |S(z0)| = 1, |Lg| = 3, L0 = 0, y0 = 0: the cubic is 2 lam^3 = theta^2
    prog = scalar_program(lambda x: (x, 1.0, 0.0), lambda x: (x * x, 2 * x, 2.0), Lg=3.0)
    z0 = PrimalDual(np.zeros(1), np.zeros(1))
    lam = initial_lambda(prog, z0, 0.25)
    assert lam == pytest.approx((1 / 32) ** (1 / 3), rel=1e-12)
    assert 2 * lam**3 == pytest.approx(0.0625, rel=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_initial_lambda_places_start_in_neighborhood(seed):
    prog = builtin_problem(["quad_softplus", "smoothed_ball", "known_kkt"][seed % 3],
                           {"n": 3, "m": 2, "seed": seed})
    rng = np.random.default_rng(seed)
    z0 = PrimalDual(rng.normal(size=3), rng.uniform(0, 1, 2))
    lam = initial_lambda(prog, z0, 0.25)
    assert neighborhood_contains(prog, z0, z0, lam, 0.0625)


def test_initial_lambda_rejects_stationary_start():
    prog = scalar_program(lambda x: (0.5 * x * x, x, 1.0), lambda x: (x, 1.0, 0.0))
    with pytest.raises(AlreadyOptimal):
        initial_lambda(prog, PrimalDual(np.zeros(1), np.zeros(1)), 0.25)


def test_start_at_solution_takes_no_iterations():
    prog = builtin_problem("known_kkt", {"seed": 1})
    res = run(prog, prog.known_solution)
    assert res.converged and res.n_iter == 0 and res.reason == "initial"


def test_iteration_cap():
    prog = builtin_problem("quad_softplus", {"n": 3, "m": 2, "seed": 0})
    res = run(prog, None, SolverConfig(delta=1e-14, eps=1e-14, max_iters=3))
    assert not res.converged and res.reason == "max_iters" and len(res.trace) == 3
    assert res.pointwise is not None
    best = [t.best_pointwise for t in res.trace]
    assert all(b >= a for a, b in zip(best[1:], best))


def test_fixed_point_takes_model_step():
    prog = builtin_problem("known_kkt", {"seed": 0})
    z = prog.known_solution
    state = SolverState(1, z, z, 0.5)
    h, tau = derive_relaxation(0.5, 0.25)
    step(prog, state, SolverConfig(), tau, 0.5)
    assert state.trace[0].branch == "B"
    assert state.z_tilde.distance(z) <= 1e-10


def test_config_validation():
    for bad in ({"sigma": 1.0}, {"theta": 0.3}, {"delta": 0}, {"max_iters": -1},
                {"lambda1": -1.0}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_budget_reference_instance():
    prog = scalar_program(lambda x: (0.5 * x * x, x, 1.0), lambda x: (x - 1, 1.0, 0.0), Lg=3.0)
    h, tau = derive_relaxation(0.5, 0.25)
    M, Me, eta, c, rho_bar = complexity_budget(prog, 1.0, 0.3, 0.5, 0.25, tau, 1e-3, 1e-3,
                                               np.zeros(1))
    assert c == pytest.approx((0.5 + (0.5 + 1 / 3) / math.sqrt(0.75)) * 3, rel=1e-15)
    assert eta == pytest.approx((1 / 16) / (c / 2), rel=1e-15)
    assert rho_bar == pytest.approx(rho_radius(prog, np.zeros(1), 0.0625 / 0.3), rel=1e-13)
    # independent evaluation of both budgets
    lg_term = math.ceil(max(math.log(max(3 * rho_bar / (1e-3 * 0.3), 1)),
                            math.log(max(rho_bar**2 / (2e-3 * 0.3), 1))) / -math.log(1 - tau))
    a = 1 / (1e-3 * tau * 0.5 * eta)
    b = 0.5 ** (4 / 3) / (1e-2 * tau * 0.75 * (2 * eta) ** (2 / 3))
    assert M == 2 * math.ceil(max(a, b)) + lg_term
    a = 2 ** (2 / 3) / (1e-2 * tau * (eta * math.sqrt(0.5)) ** (2 / 3))
    b = 2 ** (2 / 3) / (1e-2 * tau * (eta * 0.75) ** (2 / 3))
    assert Me == 2 * math.ceil(max(a, b)) + lg_term


@settings(max_examples=50, deadline=None)
@given(delta=st.floats(1e-9, 1e-1), eps=st.floats(1e-9, 1e-1))
def test_budget_monotone_in_tolerances(delta, eps):
    prog = builtin_problem("known_kkt", {"seed": 0})
    h, tau = derive_relaxation(0.5, 0.25)
    args = (prog, 2.0, 0.1, 0.5, 0.25, tau)
    y0 = np.zeros(prog.m)
    M1, Me1, *_ = complexity_budget(*args, delta, eps, y0)
    M2, Me2, *_ = complexity_budget(*args, 2 * delta, 2 * eps, y0)
    assert M2 <= M1 and Me2 <= Me1


def test_suite_converges_within_budget(suite_runs):
    for r in suite_runs:
        res = r["result"]
        assert res.converged and res.reason in ("pointwise", "ergodic")
        assert res.n_iter <= r["budget"][0]
        assert res.pointwise.meets(1e-6, 1e-6)


def test_stepsize_bookkeeping(suite_runs):
    for r in suite_runs:
        res = r["result"]
        for t in res.trace:
            expect = res.lambda1 * (1 / (1 - res.tau)) ** (t.n_B - t.n_A)
            assert abs(t.lam_next - expect) <= 1e-12 * expect
        assert res.n_A + res.n_B == len(res.trace)


def test_model_step_bounds(suite_runs):
    for r in suite_runs:
        res, sigma, rho_bar = r["result"], r["config"].sigma, r["budget"][4]
        for t in res.trace:
            if t.branch != "B":
                continue
            assert t.v_norm <= (1 + 1 / sigma) * t.rho / t.lam * (1 + 1e-10) + 1e-14
            assert t.eps <= t.rho**2 / (2 * t.lam) * (1 + 1e-10) + 1e-14
            if t.lam >= res.lambda1:
                assert t.rho <= rho_bar * (1 + 1e-12)


def test_other_families_converge():
    for family in ("quad_softplus", "smoothed_ball"):
        res = run(builtin_problem(family, {"n": 4, "m": 3, "seed": 1}))
        assert res.converged


def test_user_lambda1_and_start():
    prog = builtin_problem("known_kkt", {"seed": 4})
    z0 = PrimalDual(np.ones(prog.n), np.ones(prog.m))
    res = run(prog, z0, SolverConfig(lambda1=initial_lambda(prog, z0, 0.25) / 2))
    assert res.converged


def test_trace_exports(suite_runs):
    trace = suite_runs[0]["result"].trace
    rows = list(csv.DictReader(io.StringIO(trace_to_csv(trace))))
    assert len(rows) == len(trace) and rows[0]["branch"] in "AB"
    assert float(rows[3]["lam"]) == trace[3].lam
    doc = json.loads(trace_to_json(trace))
    assert float(doc[-1]["lam_next"]) == trace[-1].lam_next


def test_tolerance_below_double_precision_stops_cleanly():
    prog = builtin_problem("known_kkt", {"seed": 2})
    res = run(prog, None, SolverConfig(delta=1e-13, eps=1e-13))
    assert not res.converged and res.reason == "precision_limit"
    assert res.pointwise.residual_norm <= 1e-10
    assert res.trace[-1].tol_used > res.trace[-1].rho_after
