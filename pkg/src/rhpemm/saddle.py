"""Lagrangian, saddle-point operator and epsilon-subgradient checks."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_random_state
from .problems import PrimalDual


class _NegInf:
    """Tagged minus-infinity returned by :func:`extended_lagrangian`.

    Deliberately not a float: arithmetic on it raises instead of producing NaN.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEG_INF"

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self


NEG_INF = _NegInf()


@dataclass(frozen=True)
class SaddleValue:
    """``S(z) = (grad f(x) + G(x) y, -g(x))``."""

    primal_block: np.ndarray
    dual_block: np.ndarray

    def vector(self):
        return np.concatenate([self.primal_block, self.dual_block])

    def norm(self):
        return float(np.linalg.norm(self.vector()))


def lagrangian(prog, z):
    fv, _, _ = prog.f(z.x)
    gv, _, _ = prog.g(z.x)
    return fv + float(z.y @ gv)


def extended_lagrangian(prog, z):
    """``f(x) + <y, g(x)>`` for ``y >= 0``, otherwise :data:`NEG_INF`."""
    if np.any(z.y < 0):
        return NEG_INF
    return lagrangian(prog, z)


def saddle_operator(prog, z):
    _, gf, _ = prog.f(z.x)
    gv, G, _ = prog.g(z.x)
    return SaddleValue(gf + G @ z.y, -gv)


def saddle_samples(prog, z_tilde, n_samples=1000, scale=1.0, seed=0):
    """Test points ``(x, y)`` with ``y >= 0`` around ``z_tilde``.

    Half are uniform in a box, half lie along the rays ``z_tilde -+ t S(z_tilde)``
    (with ``y`` projected onto the nonnegative orthant).
    """
    rng = check_random_state(seed)
    s = saddle_operator(prog, z_tilde).vector()
    s_norm = np.linalg.norm(s)
    direction = s / s_norm if s_norm > 0 else np.zeros_like(s)
    z0 = z_tilde.vector()
    n = prog.n
    out = []
    for k in range(n_samples):
        if k % 2 == 0:
            z = z0 + scale * rng.uniform(-1.0, 1.0, z0.shape) * 10.0 ** rng.uniform(-3, 1)
        else:
            t = scale * 10.0 ** rng.uniform(-4, 1) * rng.choice([-1.0, 1.0])
            z = z0 + t * direction
        z[n:] = np.maximum(z[n:], 0.0)
        out.append(PrimalDual.from_vector(z, n))
    return out


def eps_saddle_subgradient_check(prog, z_tilde, v, eps, samples, tol=0.0):
    """Sampling test of ``v in d_eps(Lbar(., y~) - Lbar(x~, .))(x~, y~)``.

    Checks ``Lbar(x, y~) - Lbar(x~, y) >= <p, x - x~> + <q, y - y~> - eps`` on
    every sample.  ``True`` is evidence only; ``False`` is a counterexample.
    ``tol`` absorbs floating-point error and scales with the magnitudes involved.
    """
    v = np.asarray(v, dtype=float)
    p, q = v[:prog.n], v[prog.n:]
    f_t, _, _ = prog.f(z_tilde.x)
    g_t, _, _ = prog.g(z_tilde.x)
    for s in samples:
        if np.any(s.y < 0):
            continue
        f_s, _, _ = prog.f(s.x)
        g_s, _, _ = prog.g(s.x)
        terms = np.array([f_s, z_tilde.y @ g_s, f_t, s.y @ g_t,
                          p @ (s.x - z_tilde.x), q @ (s.y - z_tilde.y)])
        lhs = (terms[0] + terms[1]) - (terms[2] + terms[3])
        rhs = terms[4] + terms[5] - eps
        scale = 1.0 + np.abs(terms).sum()
        if lhs < rhs - tol * scale:
            return False
    return True
