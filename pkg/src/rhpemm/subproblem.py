"""Semismooth Newton solver for the regularized model saddle-point problem.

Eliminating ``y = (lam g(x) + ybar)_+`` leaves the primal equation

    F(x) = lam (grad f(x) + G(x) (lam g(x) + ybar)_+) + x - xbar = 0,

where ``f, g`` are the quadratic models.  ``F`` is strongly monotone and
piecewise smooth, so a Newton method on an active-set generalized Jacobian
converges fast; the dual recovery is exact.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .merit import psi_from_saddle
from .oracles import OracleConfig, OracleFailure, reference_subproblem
from .problems import PrimalDual
from .quadmodel import model_saddle_operator

_EPS = np.finfo(float).eps


class SubproblemError(RuntimeError):
    """The inner tolerance was not reached; carries the best residual seen."""

    def __init__(self, message, best_residual, best_x):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_x = best_x


@dataclass(frozen=True)
class SubproblemSolution:
    z_new: PrimalDual
    residual_norm: float
    newton_iters: int
    fallback_used: bool
    tol_used: float


def _residual(model, zbar, lam, x):
    _, gf, _ = model.f(x)
    gv, G = model.g(x)
    u = lam * gv + zbar.y
    y = np.maximum(u, 0.0)
    F = lam * (gf + G @ y) + x - zbar.x
    # magnitude of the summands, for a rounding floor on |F|
    scale = lam * (np.linalg.norm(gf) + np.linalg.norm(G) * np.linalg.norm(y)) \
        + np.linalg.norm(x) + np.linalg.norm(zbar.x)
    return F, u, y, G, scale


def _jacobian(model, lam, u, y, G):
    # kink points u_i == 0 take the inactive branch
    active = u > 0
    H = model.f_hess + np.einsum("i,ijk->jk", y, model.g_hess)
    Ga = G[:, active]
    return lam * H + lam * lam * (Ga @ Ga.T) + np.eye(model.n)


def _newton_direction(J, F):
    try:
        c = scipy.linalg.cho_factor(J, check_finite=False)
        d = scipy.linalg.cho_solve(c, -F, check_finite=False)
    except np.linalg.LinAlgError:
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
    return d if np.all(np.isfinite(d)) else None


def solve_model_saddle(model, zbar, lam, inner_tol, *, x_start=None, max_newton=200,
                       max_backtracks=30, fallback=True):
    """Solve the regularized saddle problem for ``model`` to ``|F| <= inner_tol``.

    The target is raised to a rounding floor (``64 eps`` times the size of
    the terms of ``F``, and ``8 eps |J| (|x| + 1)`` for the Jacobian ``J``)
    when ``inner_tol`` is below what double precision can certify; the value
    actually used is returned as ``tol_used``.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if inner_tol <= 0:
        raise ValueError("inner_tol must be positive")
    x = np.array(model.x_tilde if x_start is None else x_start, dtype=float)
    F, u, y, G, scale = _residual(model, zbar, lam, x)
    nF = np.linalg.norm(F)
    best = (nF, x)
    tol = max(inner_tol, 64 * _EPS * scale)
    iters = 0
    stalled = False
    while nF > tol:
        if iters >= max_newton:
            stalled = True
            break
        J = _jacobian(model, lam, u, y, G)
        # x itself is only known to ~eps |x|, which F amplifies by |J|
        floor_J = 8 * _EPS * np.linalg.norm(J, 2) * (np.linalg.norm(x) + 1.0)
        tol = max(tol, floor_J)
        if nF <= tol:
            break
        d = _newton_direction(J, F)
        if d is None:
            stalled = True
            break
        t = 1.0
        for _ in range(max_backtracks):
            x_try = x + t * d
            F_try, u_try, y_try, G_try, scale_try = _residual(model, zbar, lam, x_try)
            n_try = np.linalg.norm(F_try)
            if n_try**2 <= (1.0 - 2e-4 * t) * nF**2:
                break
            t *= 0.5
        else:
            stalled = True
            break
        iters += 1
        x, F, u, y, G, nF = x_try, F_try, u_try, y_try, G_try, n_try
        tol = max(inner_tol, 64 * _EPS * scale_try, floor_J)
        if nF < best[0]:
            best = (nF, x)
        if not np.all(np.isfinite(x)):
            raise SubproblemError("non-finite Newton iterate", best[0], best[1])

    used_fallback = False
    if stalled:
        if not fallback:
            raise SubproblemError(f"Newton stalled at |F| = {best[0]:.3e} (target {tol:.3e})",
                                  best[0], best[1])
        used_fallback = True
        try:
            z_ref = reference_subproblem(model, zbar, lam, tol=tol,
                                         config=OracleConfig(), x_start=best[1])
        except OracleFailure as exc:
            raise SubproblemError(f"fallback failed: {exc}", best[0], best[1]) from exc
        x = z_ref.x
        F, u, y, G, scale = _residual(model, zbar, lam, x)
        nF = np.linalg.norm(F)
        tol = max(inner_tol, 64 * _EPS * scale)
        if nF > tol:
            raise SubproblemError(f"fallback ended at |F| = {nF:.3e} > {tol:.3e}", nF, x)
    return SubproblemSolution(PrimalDual(x, y), float(nF), iters, used_fallback, float(tol))


def model_psi(model, z, zbar, lam):
    """Psi of ``z`` for the model operator; certifies a subproblem solve."""
    return psi_from_saddle(model_saddle_operator(model, z), z, zbar, lam)
