"""Large-step relaxed HPE method of multipliers driven by second-order models.

Each iteration either moves the prox center by a relaxed extragradient step
and shrinks the stepsize (an ``A`` step), or enlarges the stepsize and
re-solves a quadratic-model saddle subproblem around the current center (a
``B`` step).  The choice depends on whether the current model solution is
already far enough from the center, measured against the neighborhood
radius ``rho``.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_scalar
from .certificates import PointwiseCertificate, ergodic_certificate, pointwise_certificate
from .hpe import ErgodicAccumulator, HpeRecord, check_sigma_inequality
from .merit import pos, psi, relaxed_anchor_update, rho_radius
from .problems import PrimalDual, encode_floats
from .quadmodel import build_model
from .saddle import saddle_operator
from .subproblem import solve_model_saddle


class InvariantError(AssertionError):
    """A run-time invariant of the method failed; ``state`` is a snapshot."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class AlreadyOptimal(ValueError):
    """``S(z0) = 0``: the starting point solves the KKT system."""


@dataclass(frozen=True)
class SolverConfig:
    sigma: float = 0.5
    theta: float = 0.25
    delta: float = 1e-6
    eps: float = 1e-6
    max_iters: int = 10_000
    abs_floor: float = 1e-12
    kappa: float = 1e-4
    lambda1: float | None = None
    check_invariants: bool = True
    cert_samples: int = 32
    seed: int = 0

    def __post_init__(self):
        check_scalar(self.sigma, "sigma", min_val=0.0, max_val=1.0,
                     include_min=False, include_max=False)
        check_scalar(self.theta, "theta", min_val=0.0, max_val=0.25, include_min=False)
        check_scalar(self.delta, "delta", min_val=0.0, include_min=False)
        check_scalar(self.eps, "eps", min_val=0.0, include_min=False)
        check_scalar(self.abs_floor, "abs_floor", min_val=0.0, include_min=False)
        check_scalar(self.kappa, "kappa", min_val=0.0, include_min=False)
        if self.lambda1 is not None:
            check_scalar(self.lambda1, "lambda1", min_val=0.0, include_min=False)
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a nonnegative integer")
        if self.cert_samples < 1:
            raise ValueError("cert_samples must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class IterationRecord:
    k: int
    branch: str
    lam: float
    sqrt_psi: float
    rho: float
    dist: float
    margin: float
    v_norm: float
    eps: float
    lam_next: float
    n_A: int
    n_B: int
    sqrt_psi_after: float
    rho_after: float
    inner_tol: float = float("nan")
    tol_used: float = 0.0
    newton_iters: int = 0
    lam_identity_err: float = 0.0
    best_pointwise: float = float("nan")
    ergodic_residual: float = float("nan")
    ergodic_eps: float = float("nan")

    FIELDS = ("k", "branch", "lam", "sqrt_psi", "rho", "dist", "margin", "v_norm", "eps",
              "lam_next", "n_A", "n_B", "sqrt_psi_after", "rho_after", "inner_tol",
              "tol_used", "newton_iters", "lam_identity_err", "best_pointwise",
              "ergodic_residual", "ergodic_eps")


@dataclass
class SolverState:
    k: int
    z_prev: PrimalDual
    z_tilde: PrimalDual
    lam: float
    n_A: int = 0
    n_B: int = 0
    tol_used: float = 0.0
    acc: ErgodicAccumulator | None = None
    trace: list = field(default_factory=list)
    records: list = field(default_factory=list)


@dataclass
class SolveResult:
    pointwise: PointwiseCertificate | None
    ergodic: object
    reason: str
    converged: bool
    n_iter: int
    n_A: int
    n_B: int
    lambda1: float
    h: float
    tau: float
    trace: list
    records: list
    state: SolverState | None = None

    @property
    def z(self):
        best = self.pointwise if self.reason != "ergodic" else self.ergodic
        return None if best is None else best.z_tilde


def derive_relaxation(sigma, theta):
    """Positive root ``h`` of ``theta (1 + h) (1 + h (1 + 1/sigma))^2 = 1`` and ``tau = h / (1 + h)``."""
    check_scalar(sigma, "sigma", min_val=0.0, max_val=1.0, include_min=False, include_max=False)
    check_scalar(theta, "theta", min_val=0.0, max_val=0.25, include_min=False)
    k = 1.0 + 1.0 / sigma

    def phi(h):
        return theta * (1.0 + h) * (1.0 + k * h) ** 2 - 1.0

    lo, hi = 0.0, 1.0
    while phi(hi) <= 0:
        hi *= 2.0
    while hi - lo > 1e-14 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            hi = mid
        else:
            lo = mid
    h = 0.5 * (lo + hi)
    return h, h / (1.0 + h)


def _cubic_coeffs(prog, z0):
    s = saddle_operator(prog, z0).norm()
    a = 0.5 * (prog.L0 + prog.Lg @ np.abs(z0.y))
    return 2.0 * prog.Lg_norm * s * s / 3.0, a * s, s


def initial_lambda(prog, z0, theta):
    """Largest ``lam`` with ``(2 |Lg| s^2 / 3) lam^3 + a s lam^2 <= theta^2``, ``s = |S(z0)|``."""
    check_nonnegative(z0.y, "y0")
    c3, c2, s = _cubic_coeffs(prog, z0)
    if s == 0:
        raise AlreadyOptimal("S(z0) = 0")
    t2 = theta * theta
    lam = (t2 / c3) ** (1.0 / 3.0)
    if c2 > 0:
        lam = min(lam, math.sqrt(t2 / c2))
    # Newton from the right is monotone on this convex increasing cubic
    for _ in range(100):
        val = c3 * lam**3 + c2 * lam**2 - t2
        step = val / (3.0 * c3 * lam**2 + 2.0 * c2 * lam)
        lam -= step
        if abs(step) <= 1e-16 * lam:
            break
    for _ in range(60):
        if _in_neighborhood(prog, z0, z0, lam, t2):
            return float(lam)
        lam *= 1.0 - 1e-12
    raise InvariantError("initial stepsize does not place z0 in its neighborhood")


def _in_neighborhood(prog, z, zbar, lam, theta):
    return psi(prog, z, zbar, lam).sqrt_psi <= rho_radius(prog, z.y, theta / lam)


def complexity_budget(prog, d0, lambda1, sigma, theta, tau, delta, eps, y0):
    """Iteration budgets ``(M, M_ergodic, eta, c, rho_bar)`` for a distance estimate ``d0``."""
    for name, val in (("d0", d0), ("lambda1", lambda1), ("delta", delta), ("eps", eps)):
        check_scalar(val, name, min_val=0.0, include_min=name != "d0")
    check_scalar(sigma, "sigma", min_val=0.0, max_val=1.0, include_min=False, include_max=False)
    check_scalar(theta, "theta", min_val=0.0, max_val=0.25, include_min=False)
    check_scalar(tau, "tau", min_val=0.0, max_val=1.0, include_min=False, include_max=False)
    lg = prog.Lg_norm
    s2 = 1.0 - sigma**2
    c = (0.5 * (prog.L0 + prog.Lg @ np.abs(y0))
         + (0.5 + (0.5 + 2.0 * sigma / 3.0) / math.sqrt(s2)) * d0 * lg)
    eta = theta**2 / (sigma * c)
    half = 0.5 * prog.L0
    rho_bar = 2.0 * theta**2 / (lambda1 * (half + math.sqrt(half**2 + 8.0 * lg * theta**2 / (3.0 * lambda1))))

    def logp(t):
        return max(math.log(t), 0.0) if t > 0 else 0.0

    log_term = math.ceil(max(logp((1.0 + 1.0 / sigma) * rho_bar / (delta * lambda1)),
                             logp(rho_bar**2 / (2.0 * eps * lambda1)))
                         / math.log(1.0 / (1.0 - tau)))
    m_pt = max(d0**2 / (delta * tau * (1.0 - sigma) * eta),
               sigma ** (4.0 / 3.0) * d0**2 / (eps ** (2.0 / 3.0) * tau * s2 * (2.0 * eta) ** (2.0 / 3.0)))
    # the ergodic residual term carries sqrt(1 - sigma) as printed; it is the larger, safer value
    m_erg = max(2.0 ** (2.0 / 3.0) * d0 ** (4.0 / 3.0)
                / (delta ** (2.0 / 3.0) * tau * (eta * math.sqrt(1.0 - sigma)) ** (2.0 / 3.0)),
                2.0 ** (2.0 / 3.0) * d0**2 / (eps ** (2.0 / 3.0) * tau * (eta * s2) ** (2.0 / 3.0)))
    return (2 * math.ceil(m_pt) + log_term, 2 * math.ceil(m_erg) + log_term, eta, c, rho_bar)


def _inner_tol(prog, y, lam, theta, config):
    return max(config.abs_floor, config.kappa * rho_radius(prog, y, theta**2 / lam))


def _lam_identity(lambda1, tau, n_A, n_B):
    return lambda1 * (1.0 / (1.0 - tau)) ** (n_B - n_A)


def step(prog, state, config, tau, lambda1):
    """One iteration; mutates and returns ``state``."""
    sigma, theta = config.sigma, config.theta
    z_prev, z_t, lam = state.z_prev, state.z_tilde, state.lam
    ev = psi(prog, z_t, z_prev, lam)
    rho = rho_radius(prog, z_t.y, theta**2 / lam)
    dist = z_t.distance(z_prev)
    margin = sigma * dist - rho
    inner_tol, newton = float("nan"), 0
    if rho <= sigma * dist:
        branch = "A"
        z_next, lam_next = relaxed_anchor_update(prog, z_t, z_prev, lam, tau)
        lam_next = lam * (1.0 - tau)
        rec = HpeRecord(state.n_A + 1, lam, z_t, ev.v, ev.eps, tau, z_prev, z_next)
        if config.check_invariants:
            chk = check_sigma_inequality(rec, sigma, rtol=1e-12)
            if not chk:
                raise InvariantError(f"sigma inequality failed at k={state.k}: {chk.lhs} > {chk.rhs}",
                                     state)
        state.records.append(rec)
        if state.acc is None:
            state.acc = ErgodicAccumulator(prog.n + prog.m)
        state.acc.update(rec)
        state.z_prev = z_next
        state.n_A += 1
    else:
        branch = "B"
        lam_next = lam * (1.0 / (1.0 - tau))
        inner_tol = _inner_tol(prog, z_t.y, lam_next, theta, config)
        sol = solve_model_saddle(build_model(prog, z_t.x), z_prev, lam_next, inner_tol)
        newton = sol.newton_iters
        state.tol_used = sol.tol_used
        state.z_tilde = sol.z_new
        state.n_B += 1
    state.lam = lam_next
    ident = _lam_identity(lambda1, tau, state.n_A, state.n_B)
    ident_err = abs(lam_next - ident) / ident

    after = psi(prog, state.z_tilde, state.z_prev, lam_next)
    rho_after = rho_radius(prog, state.z_tilde.y, theta**2 / lam_next)
    if config.check_invariants:
        if ident_err > 1e-12 * max(1, state.k) ** 0.5 + 1e-13:
            raise InvariantError(f"stepsize bookkeeping drift {ident_err:.3e} at k={state.k}", state)
        if np.any(state.z_tilde.y < 0) or np.any(state.z_prev.y < 0):
            raise InvariantError(f"negative multiplier at k={state.k}", state)
        slack = 10.0 * state.tol_used + 1e-13 * (1.0 + after.sqrt_psi)
        if after.sqrt_psi > rho_after + slack:
            raise InvariantError(
                f"neighborhood invariant failed at k={state.k}: "
                f"{after.sqrt_psi:.6e} > {rho_after:.6e}", state)
    state.trace.append(IterationRecord(
        state.k, branch, lam, ev.sqrt_psi, rho, dist, margin,
        float(np.linalg.norm(ev.v)), ev.eps, lam_next, state.n_A, state.n_B,
        after.sqrt_psi, rho_after, inner_tol, state.tol_used, newton, ident_err))
    state.k += 1
    return state


def _initial_certificate(prog, z0):
    """Direct certificate at the starting point: ``q = -(g)_+`` gives ``g + q = -(g)_-``."""
    _, gf, _ = prog.f(z0.x)
    gv, G, _ = prog.g(z0.x)
    q = -pos(gv)
    eps = float(z0.y @ pos(-gv))
    return pointwise_certificate(prog, z0, np.concatenate([gf + G @ z0.y, q]), eps, index=0)


def _precision_exhausted(prog, state, config):
    """True when the subproblem rounding floor exceeds the neighborhood radius.

    Past that point the neighborhood cannot be certified in double precision,
    so an invariant failure says nothing about the method itself.
    """
    rho = rho_radius(prog, state.z_tilde.y, config.theta**2 / state.lam)
    return state.tol_used > rho


def _score(cert, config):
    return max(cert.residual_norm / config.delta, cert.eps / config.eps)


def run(prog, z0=None, config=None):
    """Run the method from ``z0`` (default ``(0, 0)``) until a certificate meets the tolerances.

    Ends unconverged with reason ``"max_iters"`` or ``"precision_limit"``;
    the latter when an invariant fails only because the subproblem could
    not be solved finer than the neighborhood it must land in.
    """
    config = config or SolverConfig()
    if z0 is None:
        z0 = PrimalDual(np.zeros(prog.n), np.zeros(prog.m))
    check_nonnegative(z0.y, "y0")
    h, tau = derive_relaxation(config.sigma, config.theta)

    start = _initial_certificate(prog, z0)
    if start.meets(config.delta, config.eps):
        return SolveResult(start, None, "initial", True, 0, 0, 0, float("nan"), h, tau, [], [])

    lambda1 = config.lambda1 if config.lambda1 is not None else initial_lambda(prog, z0, config.theta)
    state = SolverState(1, z0, z0, lambda1)
    best_pt, best_erg = None, None
    reason = "max_iters"
    while True:
        ev = psi(prog, state.z_tilde, state.z_prev, state.lam)
        cert = pointwise_certificate(prog, state.z_tilde, ev.v, ev.eps, index=state.k)
        if best_pt is None or _score(cert, config) < _score(best_pt, config):
            best_pt = cert
        if state.trace:
            state.trace[-1].best_pointwise = best_pt.residual_norm
        if best_pt.meets(config.delta, config.eps):
            reason = "pointwise"
            break
        if best_erg is not None and best_erg.meets(config.delta, config.eps):
            reason = "ergodic"
            break
        if state.k > config.max_iters:
            break
        n_A = state.n_A
        try:
            step(prog, state, config, tau, lambda1)
        except InvariantError:
            if not _precision_exhausted(prog, state, config):
                raise
            reason = "precision_limit"
            break
        if state.n_A > n_A:
            erg = ergodic_certificate(prog, state.acc, config.cert_samples, config.seed + state.n_A)
            state.trace[-1].ergodic_residual = erg.residual_norm
            state.trace[-1].ergodic_eps = erg.eps
            if best_erg is None or _score(erg, config) < _score(best_erg, config):
                best_erg = erg
    converged = reason not in ("max_iters", "precision_limit")
    n_iter = state.k if converged else state.k - 1
    return SolveResult(best_pt, best_erg, reason, converged, n_iter, state.n_A, state.n_B,
                       lambda1, h, tau, state.trace, state.records, state)


def trace_to_csv(trace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(IterationRecord.FIELDS)
    for row in trace:
        vals = []
        for name in IterationRecord.FIELDS:
            v = getattr(row, name)
            vals.append(format(v, ".17e") if isinstance(v, float) else v)
        writer.writerow(vals)
    return buf.getvalue()


def trace_to_json(trace):
    rows = [encode_floats({k: getattr(r, k) for k in IterationRecord.FIELDS}) for r in trace]
    return json.dumps(rows, indent=1)
