import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhpemm.hpe import (ErgodicAccumulator, HpeRecord, abstract_rate_bounds,
                        check_sigma_inequality, ergodic_history, ergodic_update,
                        fejer_violations, loglog_slope, step_size_relations)

from conftest import pd


def record(z_tilde, z_prev, v, eps, lam=1.0, tau=1.0):
    v = np.asarray(v, dtype=float)
    z_next = pd(z_prev.x - tau * lam * v[:z_prev.n], z_prev.y - tau * lam * v[z_prev.n:])
    return HpeRecord(1, lam, z_tilde, v, eps, tau, z_prev, z_next)


def test_exact_prox_step_passes_for_any_sigma():
    r = record(pd(1.0, 0.5), pd(2.0, 1.0), [1.0, 0.5], 0.0)
    for sigma in (0.0, 0.3, 0.99):
        assert check_sigma_inequality(r, sigma)


def test_zero_move_with_nonzero_residual_fails():
    r = record(pd(1.0, 1.0), pd(1.0, 1.0), [0.2, 0.0], 0.0)
    chk = check_sigma_inequality(r, 0.5)
    assert not chk and chk.lhs > 0 and chk.rhs == 0


def test_sigma_check_preconditions():
    r = record(pd(1.0, 1.0), pd(0.0, 1.0), [0.0, 0.0], -1.0)
    with pytest.raises(ValueError):
        check_sigma_inequality(r, 0.5)


def test_single_and_repeated_records():
    r = record(pd(1.0, 2.0), pd(0.0, 1.0), [0.3, -0.2], 0.1, lam=2.0, tau=0.5)
    acc = ergodic_update(ErgodicAccumulator(2), r)
    assert np.allclose(acc.z_mean, r.z_tilde.vector()) and np.allclose(acc.v_mean, r.v)
    assert acc.eps_mean == pytest.approx(0.1)
    acc.update(r)
    assert np.allclose(acc.z_mean, r.z_tilde.vector()) and acc.eps_mean == pytest.approx(0.1)
    assert acc.Lambda == pytest.approx(2 * 0.5 * 2.0)


def test_empty_accumulator_has_no_mean():
    with pytest.raises(ValueError):
        ErgodicAccumulator(3).eps_mean


def test_rate_bounds_spec_values():
    pv, pe, ev, ee = abstract_rate_bounds(1.0, 0.5, 1.0, 1.0, 1)
    assert pv == pytest.approx(2.0, rel=1e-15)
    assert pe == pytest.approx(0.25 / (0.75**1.5 * 2), rel=1e-15)
    assert ev == pytest.approx(2 / math.sqrt(0.75), rel=1e-15)
    assert ee == pytest.approx(2 / 0.75, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(d0=st.floats(0.1, 10), sigma=st.floats(0, 0.95), tau=st.floats(0.01, 1),
       eta=st.floats(0.01, 10), i=st.integers(1, 1000))
def test_rate_bounds_scale_with_iteration_count(d0, sigma, tau, eta, i):
    a = abstract_rate_bounds(d0, sigma, tau, eta, i)
    b = abstract_rate_bounds(d0, sigma, tau, eta, 4 * i)
    assert b[0] == pytest.approx(a[0] / 4, rel=1e-12)
    assert b[2] == pytest.approx(a[2] / 8, rel=1e-12)
    assert b[3] == pytest.approx(a[3] / 8, rel=1e-12)


def test_rate_bounds_domain():
    with pytest.raises(ValueError):
        abstract_rate_bounds(1.0, 1.0, 0.5, 1.0, 1)
    with pytest.raises(ValueError):
        abstract_rate_bounds(1.0, 0.5, 0.5, 0.0, 1)
    with pytest.raises(ValueError):
        abstract_rate_bounds(1.0, 0.5, 0.5, 1.0, 0)


def test_solver_records_satisfy_hpe_relations(suite_runs):
    for run in suite_runs:
        res, prog, sigma = run["result"], run["prog"], run["config"].sigma
        assert res.records
        for r in res.records:
            assert check_sigma_inequality(r, sigma, rtol=1e-12)
            assert step_size_relations(r, sigma)
            assert np.allclose(r.z_next.x, r.z_prev.x - r.tau * r.lam * r.v[:prog.n],
                               rtol=0, atol=1e-13 * (1 + np.abs(r.z_prev.x).max()))
        assert fejer_violations(res.records, prog.known_solution, sigma) == []


def test_cumulative_and_distance_bounds(suite_runs):
    for run in suite_runs:
        res, prog, sigma, d0 = run["result"], run["prog"], run["config"].sigma, run["d0"]
        zs = prog.known_solution
        root = math.sqrt(1 - sigma**2)
        total = 0.0
        for r in res.records:
            total += r.tau * (1 - sigma**2) * r.z_tilde.distance(r.z_prev) ** 2
            assert zs.distance(r.z_next) ** 2 + total <= d0**2 + 1e-10
            bound = zs.distance(r.z_prev) / root + 1e-10
            assert zs.distance(r.z_tilde) <= bound
            assert r.z_tilde.distance(r.z_prev) <= bound


def test_ergodic_gap_is_nonnegative(suite_runs):
    for run in suite_runs:
        prog = run["prog"]
        for _, eps in ergodic_history(run["result"].records, prog.n + prog.m):
            assert eps >= -1e-12


def test_loglog_slope():
    i = np.arange(1, 201)
    assert loglog_slope(3.0 * i**-1.5) == pytest.approx(-1.5, rel=1e-12)
    assert math.isnan(loglog_slope([1.0, 0.5]))
