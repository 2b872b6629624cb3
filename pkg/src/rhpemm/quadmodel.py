"""Second-order Taylor models of ``f`` and ``g`` frozen at an expansion point."""

from dataclasses import dataclass

import numpy as np

from .saddle import SaddleValue


@dataclass(frozen=True)
class QuadraticModel:
    """Explicit ``(constant, linear, Hessian)`` data for ``f`` and each ``g_i``.

    ``g_lin`` is ``n x m`` (column ``i`` is ``grad g_i(x~)``) and ``g_hess`` is
    the ``m x n x n`` stack of constraint Hessians.
    """

    x_tilde: np.ndarray
    f_const: float
    f_lin: np.ndarray
    f_hess: np.ndarray
    g_const: np.ndarray
    g_lin: np.ndarray
    g_hess: np.ndarray

    @property
    def n(self):
        return self.x_tilde.shape[0]

    @property
    def m(self):
        return self.g_const.shape[0]

    def f(self, x):
        """Model objective value, gradient and Hessian at ``x``."""
        d = x - self.x_tilde
        Hd = self.f_hess @ d
        return self.f_const + self.f_lin @ d + 0.5 * d @ Hd, self.f_lin + Hd, self.f_hess

    def g(self, x):
        """Model constraint values and the ``n x m`` gradient matrix at ``x``."""
        d = x - self.x_tilde
        Hd = self.g_hess @ d                      # m x n, row i is H_i d
        vals = self.g_const + self.g_lin.T @ d + 0.5 * Hd @ d
        return vals, self.g_lin + Hd.T


def build_model(prog, x_tilde):
    x_tilde = np.array(x_tilde, dtype=float)
    fv, gf, Hf = prog.f(x_tilde)
    gv, G, Hg = prog.g(x_tilde)
    Hf = 0.5 * (Hf + Hf.T)
    Hg = 0.5 * (Hg + np.transpose(Hg, (0, 2, 1)))
    return QuadraticModel(x_tilde, fv, gf.copy(), Hf, gv.copy(), G.copy(), Hg)


def model_saddle_operator(model, z):
    _, gf = model.f(z.x)[:2]
    gv, G = model.g(z.x)
    return SaddleValue(gf + G @ z.y, -gv)


def model_gap_bound(prog, z, x_tilde):
    """Upper bound on ``|S(x, y) - S_[x~](x, y)|`` from the Hessian-Lipschitz constants."""
    r = float(np.linalg.norm(np.asarray(z.x) - np.asarray(x_tilde)))
    a = 0.5 * (prog.L0 + prog.Lg @ np.abs(z.y))
    return a * r**2 + prog.Lg_norm / 6.0 * r**3
