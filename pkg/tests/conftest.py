import numpy as np
import pytest
from hypothesis import settings

from rhpemm.problems import ConvexProgram, PrimalDual, builtin_problem
from rhpemm.solver import SolverConfig, complexity_budget, run

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

SUITE_SEEDS = (0, 1, 2)


def scalar_program(f, g, L0=0.0, Lg=1.0):
    """1-d program from ``f(x) -> (val, d, dd)`` and ``g(x) -> (val, d, dd)``.

    Lg defaults to 1, a valid (if loose) bound even for affine ``g``.
    """
    def f_or(x):
        v, d, dd = f(x[0])
        return v, np.array([d]), np.array([[dd]])

    def g_or(x):
        v, d, dd = g(x[0])
        return np.array([v]), np.array([[d]]), np.array([[[dd]]])

    return ConvexProgram(1, 1, f_or, g_or, L0=L0, Lg=np.array([Lg]))


def pd(x, y):
    return PrimalDual(np.atleast_1d(np.asarray(x, dtype=float)),
                      np.atleast_1d(np.asarray(y, dtype=float)))


@pytest.fixture
def half_square():
    """f = x^2/2, g = x - 1."""
    return scalar_program(lambda x: (0.5 * x * x, x, 1.0), lambda x: (x - 1.0, 1.0, 0.0))


@pytest.fixture(scope="session")
def suite_runs():
    """The reference runs: known_kkt seeds 0..2, sigma=0.5, theta=0.25, tolerances 1e-6."""
    cfg = SolverConfig(sigma=0.5, theta=0.25, delta=1e-6, eps=1e-6)
    out = []
    for seed in SUITE_SEEDS:
        prog = builtin_problem("known_kkt", {"seed": seed})
        z0 = PrimalDual(np.zeros(prog.n), np.zeros(prog.m))
        res = run(prog, z0, cfg)
        d0 = z0.distance(prog.known_solution)
        budget = complexity_budget(prog, d0, res.lambda1, cfg.sigma, cfg.theta, res.tau,
                                   cfg.delta, cfg.eps, z0.y)
        out.append({"prog": prog, "result": res, "d0": d0, "budget": budget, "config": cfg})
    return out


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
