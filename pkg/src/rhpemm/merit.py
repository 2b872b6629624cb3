"""The merit function Psi of a regularized saddle-point subproblem.

For a center ``zbar`` and stepsize ``lam``,

    Psi(z) = min_{w >= 0} |lam (S(z) - (0, w)) + z - zbar|^2 + 2 lam <y, w>,

whose minimizer is ``w = (g(x) + ybar/lam)_-``.  Throughout, ``(u)_+ =
max(u, 0)`` and ``(u)_- = max(-u, 0)``, so both parts are nonnegative and
``u = (u)_+ - (u)_-``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar
from .problems import PrimalDual
from .saddle import saddle_operator


def pos(u):
    return np.maximum(u, 0.0)


def neg(u):
    return np.maximum(-u, 0.0)


@dataclass(frozen=True)
class PsiEvaluation:
    psi: float
    w: np.ndarray
    v: np.ndarray
    eps: float
    residual: np.ndarray
    psi_alt: float

    @property
    def sqrt_psi(self):
        return float(np.sqrt(max(self.psi, 0.0)))


def _check_lam(lam):
    return check_scalar(lam, "lam", min_val=0.0, include_min=False)


def optimal_w(prog, z, zbar, lam):
    lam = _check_lam(lam)
    gv, _, _ = prog.g(z.x)
    return neg(gv + zbar.y / lam)


def psi_from_saddle(sv, z, zbar, lam, check=True):
    """Evaluate Psi given ``S(z)`` as a :class:`SaddleValue`.

    Works for the true operator and for model operators alike, since Psi
    only sees ``S(z)`` (its dual block is ``-g(x)``).
    """
    lam = _check_lam(lam)
    if np.any(z.y < 0):
        raise ValueError("Psi is defined for y >= 0 only")
    gv = -sv.dual_block
    w = neg(gv + zbar.y / lam)
    v = np.concatenate([sv.primal_block, sv.dual_block - w])
    eps = float(z.y @ w)
    zd = z.vector() - zbar.vector()
    residual = lam * v + zd

    u = lam * gv + zbar.y
    r_x = lam * sv.primal_block + z.x - zbar.x
    r_y = z.y - pos(u)
    value = float(r_x @ r_x + r_y @ r_y + 2.0 * (z.y @ neg(u)))

    full = lam * sv.vector() + zd
    lead = float(full @ full)
    tail = float(neg(u) @ neg(u))
    value_alt = lead - tail
    if check and __debug__:
        # rounding in lam S + z - zbar is relative to its summands, not to the result
        mag = lam * sv.norm() + np.linalg.norm(z.vector()) + np.linalg.norm(zbar.vector())
        ulp = 64 * np.finfo(float).eps * mag
        scale = max(lead, abs(value), np.finfo(float).tiny)
        assert abs(value - value_alt) <= 1e-10 * scale + ulp * (np.sqrt(lead) + ulp), (
            f"Psi forms disagree: {value!r} vs {value_alt!r}")
    return PsiEvaluation(value, w, v, eps, residual, value_alt)


def psi(prog, z, zbar, lam, check=True):
    """Psi at ``z`` for the true saddle operator, with its ``(w, v, eps)`` split."""
    return psi_from_saddle(saddle_operator(prog, z), z, zbar, lam, check=check)


def extract_vk_eps(prog, z_tilde, zbar, lam):
    """``(v, eps, w)`` with ``v = S(z~) - (0, w)`` and ``eps = <y~, w>``."""
    ev = psi(prog, z_tilde, zbar, lam)
    return ev.v, ev.eps, ev.w


def rho_from_coeffs(a, b, alpha):
    """Largest root of ``(a + b rho) rho = alpha`` in cancellation-free form."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if a < 0 or b < 0:
        raise ValueError("coefficients must be nonnegative")
    if a == 0 and b == 0:
        raise ValueError("degenerate radius: both coefficients vanish")
    if b == 0:
        return alpha / a
    return 2.0 * alpha / (a + np.sqrt(a * a + 4.0 * b * alpha))


def rho_radius(prog, y, alpha):
    a = 0.5 * (prog.L0 + prog.Lg @ np.abs(y))
    b = 2.0 * prog.Lg_norm / 3.0
    return float(rho_from_coeffs(a, b, alpha))


def neighborhood_contains(prog, z, zbar, lam, theta):
    """Membership of ``z`` in the neighborhood ``N_theta(zbar, lam)``."""
    check_scalar(theta, "theta", min_val=0.0, include_min=False)
    ev = psi(prog, z, zbar, lam)
    return ev.sqrt_psi <= rho_radius(prog, z.y, theta / lam)


def relaxed_anchor_update(prog, z_tilde, zbar, lam, tau):
    """Extragradient move of the center: ``zbar - tau lam v`` and ``(1 - tau) lam``.

    The dual block is formed as the convex combination
    ``(1 - tau) ybar + tau (lam g + ybar)_+``, which equals
    ``ybar - tau lam v_y`` and is nonnegative in floating point whenever
    ``ybar`` is.
    """
    tau = check_scalar(tau, "tau", min_val=0.0, max_val=1.0)
    lam = _check_lam(lam)
    v, _, _ = extract_vk_eps(prog, z_tilde, zbar, lam)
    gv, _, _ = prog.g(z_tilde.x)
    x_new = zbar.x - tau * lam * v[:prog.n]
    y_new = (1.0 - tau) * zbar.y + tau * pos(lam * gv + zbar.y)
    return PrimalDual(x_new, y_new), (1.0 - tau) * lam
