"""Smooth convex programs ``min f(x) s.t. g(x) <= 0`` and built-in families.

A :class:`ConvexProgram` bundles second-order oracles for the objective and
the constraints together with Lipschitz constants of their Hessians.  The
built-in families below compute those constants analytically, so they are
valid global upper bounds.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import OracleError, check_finite, check_random_state, check_vector

# max_t |sigma''(t)| for the logistic sigmoid, attained where sigma = (3 -+ sqrt 3)/6
SOFTPLUS_D3_BOUND = np.sqrt(3.0) / 18.0

# sup_u of a triangle-inequality bound on the third derivative of sqrt(1 + |u|^2):
# 3 r (1 + 2 r^2) / (1 + r^2)^(5/2), maximal at r^2 = (1 + sqrt 5) / 4
_R2 = (1.0 + np.sqrt(5.0)) / 4.0
SMOOTH_BALL_D3_BOUND = 3.0 * np.sqrt(_R2) * (1.0 + 2.0 * _R2) / (1.0 + _R2) ** 2.5


@dataclass(frozen=True)
class PrimalDual:
    """A primal-dual pair ``z = (x, y)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.array(self.x, dtype=float).reshape(-1))
        object.__setattr__(self, "y", np.array(self.y, dtype=float).reshape(-1))

    @classmethod
    def from_vector(cls, z, n):
        z = np.asarray(z, dtype=float)
        return cls(z[:n].copy(), z[n:].copy())

    def vector(self):
        return np.concatenate([self.x, self.y])

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.y.shape[0]

    def __sub__(self, other):
        return PrimalDual(self.x - other.x, self.y - other.y)

    def norm(self):
        return float(np.sqrt(self.x @ self.x + self.y @ self.y))

    def distance(self, other):
        return (self - other).norm()

    def dual_feasible(self):
        return bool(np.all(self.y >= 0))


@dataclass(frozen=True)
class ConvexProgram:
    """Oracle bundle for a smooth convex program with inequality constraints.

    ``f_oracle(x)`` returns ``(f(x), grad f(x), hess f(x))``.  ``g_oracle(x)``
    returns ``(g(x), G, H)`` with ``G`` the ``n x m`` matrix whose column ``i``
    is ``grad g_i(x)`` and ``H`` the ``m x n x n`` stack of Hessians.
    ``L0`` and ``Lg`` bound the Lipschitz constants of the Hessians of ``f``
    and each ``g_i``.
    """

    n: int
    m: int
    f_oracle: Callable
    g_oracle: Callable
    L0: float
    Lg: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)
    x_star: np.ndarray | None = None
    y_star: np.ndarray | None = None

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise ValueError("n and m must be positive integers")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        Lg = check_vector(self.Lg, self.m, "Lg")
        if self.L0 < 0 or np.any(Lg < 0):
            raise ValueError("Lipschitz constants must be nonnegative")
        if not np.any(Lg > 0):
            raise ValueError("at least one constraint Hessian Lipschitz constant must be positive")
        object.__setattr__(self, "L0", float(self.L0))
        object.__setattr__(self, "Lg", Lg)

    @property
    def Lg_norm(self):
        return float(np.linalg.norm(self.Lg))

    @property
    def known_solution(self):
        if self.x_star is None:
            return None
        return PrimalDual(self.x_star, self.y_star)

    def descriptor(self):
        return {"family": self.family, "params": self.params}

    def f(self, x):
        val, grad, hess = self.f_oracle(x)
        check_finite(val, "objective value")
        check_finite(grad, "objective gradient")
        check_finite(hess, "objective Hessian")
        return float(val), np.asarray(grad, dtype=float), np.asarray(hess, dtype=float)

    def g(self, x):
        val, jac, hess = self.g_oracle(x)
        check_finite(val, "constraint values")
        check_finite(jac, "constraint gradients")
        check_finite(hess, "constraint Hessians")
        return (np.asarray(val, dtype=float).reshape(self.m),
                np.asarray(jac, dtype=float).reshape(self.n, self.m),
                np.asarray(hess, dtype=float).reshape(self.m, self.n, self.n))

    def validate(self, n_samples=100, radius=3.0, center=None, seed=0, slack=1e-9):
        """Sample-based check of convexity and Hessian-Lipschitz bounds.

        Returns a dict of the worst observed quantities; raises ``ValueError``
        on a definite violation.  Passing is evidence, not proof.
        """
        rng = check_random_state(seed)
        center = np.zeros(self.n) if center is None else np.asarray(center, float)
        min_eig = np.inf
        ratio_f = 0.0
        ratio_g = np.zeros(self.m)
        for _ in range(n_samples):
            a = center + radius * rng.standard_normal(self.n)
            b = a + rng.standard_normal(self.n) * rng.uniform(1e-3, radius)
            _, _, Ha = self.f(a)
            _, _, Hb = self.f(b)
            _, _, Ga = self.g(a)
            _, _, Gb = self.g(b)
            min_eig = min(min_eig, np.linalg.eigvalsh(Ha).min(),
                          min(np.linalg.eigvalsh(h).min() for h in Ga))
            d = np.linalg.norm(a - b)
            ratio_f = max(ratio_f, np.linalg.norm(Ha - Hb, 2) / d)
            ratio_g = np.maximum(ratio_g, [np.linalg.norm(Ga[i] - Gb[i], 2) / d
                                           for i in range(self.m)])
        if min_eig < -1e-10:
            raise ValueError(f"sampled Hessian has negative eigenvalue {min_eig}")
        if ratio_f > self.L0 + slack or np.any(ratio_g > self.Lg + slack):
            raise ValueError("sampled Hessian-Lipschitz ratio exceeds declared constant")
        return {"min_eigenvalue": float(min_eig), "ratio_f": float(ratio_f),
                "ratio_g": ratio_g}


def kkt_residual(prog, z):
    """Residual blocks of the KKT system at ``z``.

    Returns ``(stationarity, primal_violation, dual_violation, comp_gap)``:
    ``grad f + G y``, ``max(g, 0)``, ``max(-y, 0)`` and ``|<y, g>|``.
    """
    _, gf, _ = prog.f(z.x)
    gv, G, _ = prog.g(z.x)
    stat = gf + G @ z.y
    return stat, np.maximum(gv, 0.0), np.maximum(-z.y, 0.0), float(abs(z.y @ gv))


def kkt_error(prog, z):
    """Largest KKT residual entry at ``z`` (infinity norm over all blocks)."""
    stat, pv, dv, gap = kkt_residual(prog, z)
    return float(max(np.abs(stat).max(), pv.max(), dv.max(), gap))


# ---------------------------------------------------------------------------
# elementary smooth pieces


def _sigmoid(t):
    return np.where(t >= 0, 1.0 / (1.0 + np.exp(-np.abs(t))),
                    np.exp(-np.abs(t)) / (1.0 + np.exp(-np.abs(t))))


def _softplus(t):
    return np.logaddexp(0.0, t)


def _quadratic(Q, c):
    def oracle(x):
        Qx = Q @ x
        return 0.5 * x @ Qx + c @ x, Qx + c, Q.copy()
    return oracle


def _quadratic_plus_softplus(Q, c, e):
    """``0.5 x'Qx + c'x + softplus(e'x)``."""
    def oracle(x):
        t = e @ x
        s = _sigmoid(t)
        Qx = Q @ x
        return (0.5 * x @ Qx + c @ x + _softplus(t),
                Qx + c + s * e,
                Q + s * (1.0 - s) * np.outer(e, e))
    return oracle


def _mixed_constraints(kinds, A, b, centers, r):
    """Constraints ``softplus(a_i'x - b_i) - r_i`` or ``sqrt(1+|x-c_i|^2) - r_i``."""
    m, n = len(kinds), A.shape[1]

    def oracle(x):
        vals = np.empty(m)
        G = np.empty((n, m))
        H = np.empty((m, n, n))
        for i, kind in enumerate(kinds):
            if kind == "softplus":
                t = A[i] @ x - b[i]
                s = _sigmoid(t)
                vals[i] = _softplus(t) - r[i]
                G[:, i] = s * A[i]
                H[i] = s * (1.0 - s) * np.outer(A[i], A[i])
            else:
                u = x - centers[i]
                phi = np.sqrt(1.0 + u @ u)
                vals[i] = phi - r[i]
                G[:, i] = u / phi
                H[i] = np.eye(n) / phi - np.outer(u, u) / phi**3
        return vals, G, H
    return oracle


# ---------------------------------------------------------------------------
# parameter parsing


def _get_dims(params):
    if "n" not in params or "m" not in params:
        raise ValueError("params must define 'n' and 'm'")
    n, m = int(params["n"]), int(params["m"])
    if n < 1 or m < 1:
        raise ValueError("'n' and 'm' must be positive")
    return n, m


def _as_float(v):
    return float(v) if isinstance(v, str) else v


def _parse_array(value, shape, name):
    """Broadcast scalars, nested lists or decimal strings to ``shape``."""
    if isinstance(value, str):
        if value.strip().upper() in ("I", "IDENTITY") and len(shape) == 2:
            return np.eye(shape[0])
        value = float(value)
    arr = np.asarray(value, dtype=object)
    arr = np.vectorize(_as_float, otypes=[float])(arr) if arr.size else arr.astype(float)
    if arr.ndim == 0:
        if len(shape) == 2 and shape[0] == shape[1]:
            return float(arr) * np.eye(shape[0])
        return np.full(shape, float(arr))
    if arr.size == np.prod(shape):
        arr = arr.reshape(shape)
    if arr.shape != tuple(shape):
        raise ValueError(f"parameter '{name}' must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"parameter '{name}' has non-finite entries")
    return arr


def _check_psd(Q, name="Q"):
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise ValueError(f"parameter '{name}' must be symmetric")
    lam_min = np.linalg.eigvalsh(Q).min()
    if lam_min < -1e-12 * max(1.0, np.abs(Q).max()):
        raise ValueError(f"parameter '{name}' is not positive semidefinite "
                         f"(min eigenvalue {lam_min:.3e}); the objective would be nonconvex")
    return 0.5 * (Q + Q.T)


def _random_pd(rng, n, mu=0.5):
    B = rng.standard_normal((n, n))
    return B.T @ B / n + mu * np.eye(n)


# ---------------------------------------------------------------------------
# families


def quad_softplus(params):
    """``0.5 x'Qx + c'x`` subject to ``softplus(a_i'x - b_i) <= r_i``.

    Missing data are drawn from ``seed``.  ``Q`` accepts a matrix, a scalar
    multiple of the identity, or ``"I"``.
    """
    n, m = _get_dims(params)
    rng = check_random_state(int(params.get("seed", 0)))
    Q = _check_psd(_parse_array(params["Q"], (n, n), "Q")) if "Q" in params else _random_pd(rng, n)
    c = _parse_array(params["c"], (n,), "c") if "c" in params else rng.standard_normal(n)
    A_raw = params.get("A", params.get("a"))
    A = _parse_array(A_raw, (m, n), "A") if A_raw is not None else rng.standard_normal((m, n))
    b = _parse_array(params["b"], (m,), "b") if "b" in params else rng.standard_normal(m)
    r = _parse_array(params["r"], (m,), "r") if "r" in params else rng.uniform(0.5, 2.0, m)
    if np.any(r <= 0):
        raise ValueError("parameter 'r' must be positive (softplus > 0 leaves no feasible point)")
    Lg = SOFTPLUS_D3_BOUND * np.linalg.norm(A, axis=1) ** 3
    if not np.any(Lg > 0):
        raise ValueError("all constraint normals vanish; Hessian Lipschitz constants would be zero")
    return ConvexProgram(
        n, m, _quadratic(Q, c),
        _mixed_constraints(["softplus"] * m, A, b, None, r),
        L0=0.0, Lg=Lg, family="quad_softplus", params=dict(params),
    )


def smoothed_ball(params):
    """``0.5 x'Qx + c'x`` subject to ``sqrt(1 + |x - c_i|^2) <= r_i`` with ``r_i > 1``."""
    n, m = _get_dims(params)
    rng = check_random_state(int(params.get("seed", 0)))
    Q = _check_psd(_parse_array(params["Q"], (n, n), "Q")) if "Q" in params else _random_pd(rng, n)
    c = _parse_array(params["c"], (n,), "c") if "c" in params else 3.0 * rng.standard_normal(n)
    centers = (_parse_array(params["centers"], (m, n), "centers")
               if "centers" in params else 0.5 * rng.standard_normal((m, n)))
    r = _parse_array(params["r"], (m,), "r") if "r" in params else rng.uniform(1.5, 3.0, m)
    if np.any(r <= 1.0):
        raise ValueError("parameter 'r' must exceed 1 for a strictly feasible point")
    return ConvexProgram(
        n, m, _quadratic(Q, c),
        _mixed_constraints(["ball"] * m, np.zeros((m, n)), np.zeros(m), centers, r),
        L0=0.0, Lg=np.full(m, SMOOTH_BALL_D3_BOUND),
        family="smoothed_ball", params=dict(params),
    )


def known_kkt(params):
    """A program built around a chosen KKT pair ``(x*, y*)``.

    The objective is ``0.5 x'Qx + c'x + softplus(e'x)`` with ``Q`` positive
    definite; constraints alternate softplus and smoothed-ball pieces.  The
    first ``n_active`` constraints are active with positive multipliers, the
    rest are inactive.  ``c`` is solved from stationarity and the shifts
    ``r_i`` from complementarity.  With ``n_active <= n`` the active
    gradients are generically independent, so the KKT pair is unique.
    """
    params = dict(params)
    n = int(params.setdefault("n", 4))
    m = int(params.setdefault("m", 3))
    seed = int(params.setdefault("seed", 0))
    if n < 1 or m < 1:
        raise ValueError("'n' and 'm' must be positive")
    n_active = int(params.get("n_active", min(m, max(1, n // 2))))
    if not 0 <= n_active <= min(m, n):
        raise ValueError("'n_active' must lie in [0, min(m, n)]")
    rng = check_random_state(seed)
    Q = _random_pd(rng, n)
    e = rng.standard_normal(n) / np.sqrt(n)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    centers = rng.standard_normal((m, n))
    kinds = ["softplus" if i % 2 == 0 else "ball" for i in range(m)]
    x_star = rng.standard_normal(n)
    y_star = np.zeros(m)
    y_star[:n_active] = rng.uniform(0.5, 2.0, n_active)
    slack = np.zeros(m)
    slack[n_active:] = rng.uniform(0.5, 1.5, m - n_active)

    base = _mixed_constraints(kinds, A, b, centers, np.zeros(m))
    h_star, G_star, _ = base(x_star)
    r = h_star + slack
    t = e @ x_star
    c = -(Q @ x_star) - _sigmoid(t) * e - G_star @ y_star

    Lg = np.array([SOFTPLUS_D3_BOUND * np.linalg.norm(A[i]) ** 3 if kind == "softplus"
                   else SMOOTH_BALL_D3_BOUND for i, kind in enumerate(kinds)])
    return ConvexProgram(
        n, m, _quadratic_plus_softplus(Q, c, e),
        _mixed_constraints(kinds, A, b, centers, r),
        L0=SOFTPLUS_D3_BOUND * np.linalg.norm(e) ** 3, Lg=Lg,
        family="known_kkt", params=params, x_star=x_star, y_star=y_star,
    )


REGISTRY = {
    "quad_softplus": quad_softplus,
    "smoothed_ball": smoothed_ball,
    "known_kkt": known_kkt,
}


def builtin_problem(name, params=None):
    """Instantiate a registered problem family."""
    if name not in REGISTRY:
        raise KeyError(f"unknown problem family {name!r}; available: {sorted(REGISTRY)}")
    return REGISTRY[name](dict(params or {}))


# ---------------------------------------------------------------------------
# JSON round trip; floats travel as 17-significant-digit decimal strings


def encode_floats(obj):
    """Recursively replace floats (and float arrays) by ``'%.17e'`` strings."""
    if isinstance(obj, dict):
        return {str(k): encode_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_floats(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17e")
    return obj


def problem_to_json(prog):
    """Serializable descriptor ``{"family": ..., "params": ...}``."""
    if prog.family not in REGISTRY:
        raise ValueError(f"program family {prog.family!r} is not serializable")
    return {"family": prog.family, "params": encode_floats(prog.params)}


def problem_from_json(doc):
    """Rebuild a program from a descriptor, naming the offending field on error."""
    if not isinstance(doc, dict):
        raise ValueError("problem document must be a JSON object")
    if "family" not in doc:
        raise ValueError("problem document is missing field 'family'")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ValueError("field 'params' must be a JSON object")
    return builtin_problem(doc["family"], params)


__all__ = [
    "ConvexProgram", "PrimalDual", "OracleError", "kkt_residual", "kkt_error",
    "builtin_problem", "problem_to_json", "problem_from_json", "REGISTRY",
    "SOFTPLUS_D3_BOUND", "SMOOTH_BALL_D3_BOUND",
]
