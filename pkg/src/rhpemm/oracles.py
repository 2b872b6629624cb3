"""Slow, independent reference computations used to cross-check the solver.

Nothing here calls into the kernels it is meant to check: the reference
subproblem solver evaluates the model from its raw arrays, the grid
minimizer never sees the closed-form multiplier, and the ergodic averages
are recomputed from stored records in two passes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .problems import PrimalDual


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 20001
    initial_step: float = 1.0
    max_iter: int = 2_000_000
    tol: float = 1e-11
    seed: int = 0
    polish_every: int = 500

    def __post_init__(self):
        if (self.grid_points < 2 or self.initial_step <= 0 or self.max_iter < 1 or self.tol <= 0
                or self.polish_every < 1):
            raise ValueError("oracle settings must be positive")


class OracleFailure(RuntimeError):
    pass


def _model_pieces(model, x):
    d = x - model.x_tilde
    f_grad = model.f_lin + model.f_hess @ d
    f_val = model.f_const + model.f_lin @ d + 0.5 * d @ (model.f_hess @ d)
    Hd = np.einsum("ijk,k->ij", model.g_hess, d)
    g_val = model.g_const + np.einsum("ji,j->i", model.g_lin, d) + 0.5 * np.einsum("ij,j->i", Hd, d)
    g_grad = model.g_lin + Hd.T
    return f_val, f_grad, g_val, g_grad


def reference_subproblem(model, zbar, lam, tol=1e-11, config=None, x_start=None):
    """Solve the regularized model saddle problem by damped fixed-point steps.

    The primal solution is the zero of the reduced residual
    ``F(x) = lam (grad f(x) + G(x) (lam g(x) + ybar)_+) + x - xbar``, the gradient
    of the strongly convex ``lam f + |(lam g + ybar)_+|^2 / 2 + |x - xbar|^2 / 2``.
    Steps ``x - alpha F(x)`` are accepted when ``alpha`` times the observed
    Lipschitz ratio of ``F`` over the step is at most 1/2, which makes the
    convex potential decrease by at least ``alpha |F|^2 / 2``.  After an
    accepted step ``alpha`` grows by 1.5.  On badly conditioned instances the
    steps are periodically interleaved with a MINPACK hybrid root solve,
    accepted only when it lowers ``|F|``.  The dual is ``(lam g(x) + ybar)_+``.
    """
    config = config or OracleConfig()
    if lam <= 0:
        raise ValueError("lam must be positive")

    def residual(x):
        _, f_grad, g_val, g_grad = _model_pieces(model, x)
        y = np.maximum(lam * g_val + zbar.y, 0.0)
        return lam * (f_grad + g_grad @ y) + x - zbar.x

    x = np.array(zbar.x if x_start is None else x_start, dtype=float)
    F = residual(x)
    alpha = config.initial_step
    for it in range(config.max_iter):
        nF = np.linalg.norm(F)
        if nF <= tol:
            break
        if it % config.polish_every == config.polish_every - 1:
            # MINPACK's hybrid method from the current iterate; kept only if it lands
            sol = scipy.optimize.root(residual, x, method="hybr", options={"xtol": 1e-15})
            F_pol = residual(sol.x)
            if np.linalg.norm(F_pol) < nF:
                x, F = sol.x, F_pol
                continue
        for _ in range(200):
            x_new = x - alpha * F
            F_new = residual(x_new)
            lip = np.linalg.norm(F_new - F) / (alpha * nF)
            if alpha * lip <= 0.5:
                break
            alpha = 0.25 / lip
        else:
            raise OracleFailure(f"reference subproblem found no acceptable step at |F| = {nF:.3e}")
        x, F = x_new, F_new
        alpha *= 1.5
    else:
        raise OracleFailure(f"reference subproblem hit its iteration cap, |F| = {np.linalg.norm(F):.3e}")
    _, _, g_val, _ = _model_pieces(model, x)
    return PrimalDual(x, np.maximum(lam * g_val + zbar.y, 0.0))


def reference_residual(model, zbar, lam, x):
    """Norm of the reduced residual at ``x`` evaluated with oracle-side kernels."""
    _, f_grad, g_val, g_grad = _model_pieces(model, x)
    y = np.maximum(lam * g_val + zbar.y, 0.0)
    return float(np.linalg.norm(lam * (f_grad + g_grad @ y) + x - zbar.x))


def grid_w_minimizer(prog, z, zbar, lam, grid=20001):
    """Per-coordinate grid search for the inner minimization over ``w >= 0``.

    Each coordinate minimizes ``(lam (-g_i - w) + y_i - ybar_i)^2 + 2 lam y_i w``
    over ``grid`` equispaced points of ``[0, W_i]`` with
    ``W_i = 2 (|g_i| + |ybar_i| / lam) + 1``, which contains the minimizer.
    Returns the grid argmin and the per-coordinate grid spacing.
    """
    g_val, _, _ = prog.g(z.x)
    W = 2.0 * (np.abs(g_val) + np.abs(zbar.y) / lam) + 1.0
    w = np.empty(prog.m)
    spacing = W / (grid - 1)
    for i in range(prog.m):
        ws = np.linspace(0.0, W[i], grid)
        obj = (lam * (-g_val[i] - ws) + z.y[i] - zbar.y[i]) ** 2 + 2.0 * lam * z.y[i] * ws
        w[i] = ws[np.argmin(obj)]
    return w, spacing


def two_pass_ergodic(records):
    """Direct evaluation of the weighted ergodic averages of A-branch records."""
    if not records:
        raise ValueError("need at least one record")
    weights = np.array([r.tau * r.lam for r in records])
    Z = np.array([r.z_tilde.vector() for r in records])
    V = np.array([np.asarray(r.v) for r in records])
    E = np.array([r.eps for r in records])
    total = weights.sum()
    z_avg = weights @ Z / total
    v_avg = weights @ V / total
    corr = np.einsum("ij,ij->i", Z - z_avg, V - v_avg)
    eps_avg = float(weights @ (E + corr) / total)
    n = records[0].z_tilde.n
    return PrimalDual.from_vector(z_avg, n), v_avg, eps_avg


def fd_gradient(fun, x, h=1e-6):
    """Central-difference gradient of a scalar or vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)
