"""Relaxed HPE bookkeeping: error-criterion checks, ergodic means, rate bounds."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_scalar
from .problems import PrimalDual


@dataclass(frozen=True)
class HpeRecord:
    """One relaxed extragradient step ``z_next = z_prev - tau lam v``."""

    index: int
    lam: float
    z_tilde: PrimalDual
    v: np.ndarray
    eps: float
    tau: float
    z_prev: PrimalDual
    z_next: PrimalDual


@dataclass(frozen=True)
class SigmaCheck:
    ok: bool
    lhs: float
    rhs: float

    def __bool__(self):
        return self.ok


def check_sigma_inequality(record, sigma, rtol=0.0):
    """``|lam v + z~ - z_prev|^2 + 2 lam eps <= sigma^2 |z~ - z_prev|^2``."""
    lam, eps = record.lam, record.eps
    if lam <= 0 or eps < 0:
        raise ValueError("need lam > 0 and eps >= 0")
    d = record.z_tilde.vector() - record.z_prev.vector()
    r = lam * np.asarray(record.v) + d
    lhs = float(r @ r + 2.0 * lam * eps)
    rhs = float(sigma**2 * (d @ d))
    return SigmaCheck(lhs <= rhs * (1.0 + rtol), lhs, rhs)


class ErgodicAccumulator:
    """Running stepsize-weighted means of ``z~``, ``v`` and the corrected ``eps``.

    Weights are ``tau * lam``.  The correction term
    ``sum_j w_j <z~_j - z~^a, v_j - v^a>`` is kept as a weighted co-moment
    updated in one pass (West's weighted update), so no history is stored.
    """

    def __init__(self, dim):
        self.count = 0
        self.Lambda = 0.0
        self.z_mean = np.zeros(dim)
        self.v_mean = np.zeros(dim)
        self.eps_sum = 0.0
        self.comoment = 0.0

    def update(self, record):
        wt = record.tau * record.lam
        z = record.z_tilde.vector()
        v = np.asarray(record.v, dtype=float)
        self.Lambda += wt
        dz = z - self.z_mean
        self.z_mean = self.z_mean + (wt / self.Lambda) * dz
        dv = v - self.v_mean
        self.v_mean = self.v_mean + (wt / self.Lambda) * dv
        self.comoment += wt * float(dz @ (v - self.v_mean))
        self.eps_sum += wt * record.eps
        self.count += 1
        return self

    @property
    def eps_mean(self):
        if self.count == 0:
            raise ValueError("empty accumulator")
        return (self.eps_sum + self.comoment) / self.Lambda

    def z_tilde(self, n):
        return PrimalDual.from_vector(self.z_mean, n)


def ergodic_update(acc, record):
    return acc.update(record)


def abstract_rate_bounds(d0, sigma, tau, eta, i):
    """Pointwise and ergodic residual/gap bounds after ``i`` large-step iterations.

    Returns ``(pointwise_v, pointwise_eps, ergodic_v, ergodic_eps)``.
    """
    check_scalar(sigma, "sigma", min_val=0.0, max_val=1.0, include_max=False)
    check_scalar(tau, "tau", min_val=0.0, max_val=1.0, include_min=False)
    check_scalar(eta, "eta", min_val=0.0, include_min=False)
    check_scalar(d0, "d0", min_val=0.0)
    if i < 1:
        raise ValueError("i must be at least 1")
    it = i * tau
    s2 = 1.0 - sigma**2
    return (
        d0**2 / (it * (1.0 - sigma) * eta),
        sigma**2 * d0**3 / (it**1.5 * s2**1.5 * 2.0 * eta),
        2.0 * d0**2 / (it**1.5 * np.sqrt(s2) * eta),
        2.0 * d0**3 / (it**1.5 * s2 * eta),
    )


def fejer_violations(records, z_star, sigma, slack=1e-10):
    """Indices of records breaking ``|z* - z_next|^2 + tau (1 - sigma^2) |z~ - z_prev|^2
    <= |z* - z_prev|^2`` (which implies plain distance monotonicity)."""
    bad = []
    for r in records:
        d_next = z_star.distance(r.z_next)
        d_prev = z_star.distance(r.z_prev)
        gap = r.tau * (1.0 - sigma**2) * r.z_tilde.distance(r.z_prev) ** 2
        if d_next > d_prev + slack or d_next**2 + gap > d_prev**2 + slack * (1.0 + d_prev):
            bad.append(r.index)
    return bad


def step_size_relations(record, sigma, rtol=1e-12):
    """``(1 - sigma) s <= |lam v| <= (1 + sigma) s`` and ``2 lam eps <= sigma^2 s^2``
    with ``s = |z~ - z_prev|``."""
    s = record.z_tilde.distance(record.z_prev)
    lv = record.lam * float(np.linalg.norm(record.v))
    tol = rtol * (1.0 + s)
    return ((1.0 - sigma) * s <= lv + tol
            and lv <= (1.0 + sigma) * s + tol
            and 2.0 * record.lam * record.eps <= sigma**2 * s * s + tol * s)


def ergodic_history(records, dim):
    """``(|v^a_i|, eps^a_i)`` for every prefix of ``records``."""
    acc = ErgodicAccumulator(dim)
    out = []
    for r in records:
        acc.update(r)
        out.append((float(np.linalg.norm(acc.v_mean)), acc.eps_mean))
    return out


def loglog_slope(values, lo=10, hi=100):
    """Least-squares slope of ``log values[i-1]`` against ``log i`` for ``lo <= i <= hi``.

    Returns ``nan`` when fewer than three usable points exist.
    """
    vals = np.asarray(values, dtype=float)
    i = np.arange(1, vals.size + 1)
    keep = (i >= lo) & (i <= hi) & (vals > 0)
    if keep.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(i[keep]), np.log(vals[keep]), 1)[0])
