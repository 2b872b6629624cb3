"""Approximate KKT certificates built from solver output, and their verification.

A pointwise certificate is a point ``z~ = (x~, y~)`` with residuals ``(p, q)``
and gap ``eps`` such that

    p = grad f(x~) + G(x~) y~,   g(x~) + q <= 0,   y~ >= 0,   <y~, g(x~) + q> = -eps.

The ergodic version relaxes stationarity to an ``eps'``-subgradient of the
Lagrangian in ``x`` and complementarity to ``<y~, g + q> >= -eps``.
"""

from dataclasses import dataclass, field

import numpy as np

from .problems import PrimalDual, encode_floats
from .saddle import eps_saddle_subgradient_check, saddle_samples

TOL = 1e-9


class CertificateError(ValueError):
    """A certificate relation failed; ``relation`` names it, ``margin`` is the excess."""

    def __init__(self, relation, margin, detail=""):
        super().__init__(f"{relation} violated by {margin:.3e}" + (f" ({detail})" if detail else ""))
        self.relation = relation
        self.margin = float(margin)


def _tol(*arrays):
    return TOL * (1.0 + max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays))


@dataclass(frozen=True)
class PointwiseCertificate:
    z_tilde: PrimalDual
    p: np.ndarray
    q: np.ndarray
    eps: float
    index: int = -1
    margins: dict = field(default_factory=dict, compare=False)

    kind = "pointwise"

    @property
    def residual_norm(self):
        return float(np.sqrt(self.p @ self.p + self.q @ self.q))

    def meets(self, delta, eps):
        return self.residual_norm <= delta and self.eps <= eps

    def to_dict(self):
        return encode_floats({
            "kind": self.kind, "index": self.index,
            "x": self.z_tilde.x, "y": self.z_tilde.y,
            "p": self.p, "q": self.q, "eps": self.eps,
            "residual_norm": self.residual_norm, "margins": self.margins,
        })


@dataclass(frozen=True)
class ErgodicCertificate:
    z_tilde: PrimalDual
    p: np.ndarray
    q: np.ndarray
    eps: float
    eps_prime: float
    count: int = 0
    margins: dict = field(default_factory=dict, compare=False)

    kind = "ergodic"

    @property
    def residual_norm(self):
        return float(np.sqrt(self.p @ self.p + self.q @ self.q))

    def meets(self, delta, eps):
        return self.residual_norm <= delta and self.eps <= eps

    def to_dict(self):
        return encode_floats({
            "kind": self.kind, "count": self.count,
            "x": self.z_tilde.x, "y": self.z_tilde.y,
            "p": self.p, "q": self.q, "eps": self.eps, "eps_prime": self.eps_prime,
            "residual_norm": self.residual_norm, "margins": self.margins,
        })


def _pointwise_margins(prog, z, p, q, eps):
    _, gf, _ = prog.f(z.x)
    gv, G, _ = prog.g(z.x)
    stat = p - (gf + G @ z.y)
    slack = gv + q
    return {
        "stationarity": (float(np.max(np.abs(stat))), _tol(p, gf, G @ z.y)),
        "primal_feasibility": (float(np.max(slack, initial=-np.inf)), _tol(gv, q)),
        "dual_feasibility": (float(np.max(-z.y, initial=-np.inf)), 0.0),
        "complementarity": (abs(float(z.y @ slack) + eps), _tol(z.y * slack, eps)),
    }


def _raise_first(margins):
    for name, (value, tol) in margins.items():
        if value > tol:
            raise CertificateError(name, value - tol)


def pointwise_certificate(prog, z_tilde, v, eps, index=-1):
    """Split ``v`` into ``(p, q)`` and verify the four pointwise relations."""
    v = np.asarray(v, dtype=float)
    p, q = v[:prog.n].copy(), v[prog.n:].copy()
    eps = float(eps)
    if eps < 0:
        raise CertificateError("gap_sign", -eps)
    margins = _pointwise_margins(prog, z_tilde, p, q, eps)
    _raise_first(margins)
    return PointwiseCertificate(z_tilde, p, q, eps, index,
                                {k: m[0] for k, m in margins.items()})


def _lagrangian(prog, x, y):
    fv, _, _ = prog.f(x)
    gv, _, _ = prog.g(x)
    return fv + y @ gv, fv, y @ gv


def x_subgradient_check(prog, z, p, eps, n_samples=200, seed=0, scale=1.0):
    """Sampling test of ``p in d_{x, eps} L(., y)`` at ``x`` for fixed ``y``."""
    base, f0, c0 = _lagrangian(prog, z.x, z.y)
    rng = np.random.default_rng(seed)
    r = scale * (1.0 + np.linalg.norm(z.x))
    for k in range(n_samples):
        if k % 2:
            d = rng.uniform(-r, r, prog.n)
        else:
            # directions against p are the most informative
            d = -p * rng.uniform(0.0, r) / max(np.linalg.norm(p), 1e-300) + rng.normal(0, 1e-3 * r, prog.n)
        x = z.x + d
        val, f1, c1 = _lagrangian(prog, x, z.y)
        rhs = p @ d - eps
        sc = 1.0 + abs(f0) + abs(c0) + abs(f1) + abs(c1) + abs(p @ d)
        if val - base < rhs - TOL * sc:
            return False
    return True


def ergodic_certificate(prog, acc, n_samples=200, seed=0):
    """Certificate from the weighted averages held by an ergodic accumulator."""
    if acc.count == 0:
        raise ValueError("empty accumulator")
    z = acc.z_tilde(prog.n)
    p, q = acc.v_mean[:prog.n].copy(), acc.v_mean[prog.n:].copy()
    eps = float(acc.eps_mean)
    return _ergodic_from_parts(prog, z, p, q, eps, acc.count, n_samples, seed)


def _ergodic_margins(prog, z, p, q, eps):
    gv, _, _ = prog.g(z.x)
    slack = gv + q
    inner = float(z.y @ slack)
    eps_prime = eps + inner
    t = _tol(z.y * slack, eps)
    margins = {
        "gap_sign": (-eps, 1e-12),
        "primal_feasibility": (float(np.max(slack, initial=-np.inf)), _tol(gv, q)),
        "dual_feasibility": (float(np.max(-z.y, initial=-np.inf)), 0.0),
        "complementarity": (-eps_prime, t),
        "eps_prime_upper": (eps_prime - eps, t),
    }
    return margins, eps_prime


def _ergodic_from_parts(prog, z, p, q, eps, count, n_samples, seed):
    margins, eps_prime = _ergodic_margins(prog, z, p, q, eps)
    _raise_first(margins)
    if not x_subgradient_check(prog, z, p, max(eps_prime, 0.0), n_samples, seed):
        raise CertificateError("x_subgradient", 0.0, "sampled counterexample")
    return ErgodicCertificate(z, p, q, eps, eps_prime, count,
                              {k: m[0] for k, m in margins.items()})


@dataclass(frozen=True)
class TransposedForms:
    form_a: bool
    form_b: bool
    form_c: bool
    eps_prime: float


def transpose_conditions(prog, z_tilde, v, eps, n_samples=1000, seed=0):
    """Evaluate the three equivalent forms of ``v in d_eps(...)(z~)``.

    The slack ``w = -(g(x~) + q)`` and ``eps' = eps - <y~, w>`` are computed
    directly; the sign and gap relations are exact, the subgradient parts
    are sampled.
    """
    if np.any(z_tilde.y < 0) or eps < 0:
        raise ValueError("need y~ >= 0 and eps >= 0")
    v = np.asarray(v, dtype=float)
    p, q = v[:prog.n], v[prog.n:]
    gv, _, _ = prog.g(z_tilde.x)
    w = -(gv + q)
    yw = float(z_tilde.y @ w)
    eps_prime = float(eps) - yw
    t = _tol(z_tilde.y * w, eps)
    w_ok = bool(np.all(w >= -_tol(gv, q)))
    sub_ok = x_subgradient_check(prog, z_tilde, p, max(eps_prime, 0.0) + t, n_samples // 5, seed)
    form_b = w_ok and yw <= eps + t and sub_ok
    form_c = (-t <= eps_prime <= eps + t) and w_ok and yw <= eps - eps_prime + t and sub_ok
    samples = saddle_samples(prog, z_tilde, n_samples=n_samples, seed=seed)
    form_a = eps_saddle_subgradient_check(prog, z_tilde, v, eps, samples, tol=TOL)
    return TransposedForms(bool(form_a), bool(form_b), bool(form_c), eps_prime)


def _decode(doc, key, shape=None):
    if key not in doc:
        raise ValueError(f"certificate is missing field '{key}'")
    try:
        a = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"certificate field '{key}' is not numeric") from exc
    if shape is not None and a.shape != shape:
        raise ValueError(f"certificate field '{key}' has shape {a.shape}, expected {shape}")
    return a


def certificate_from_dict(doc, prog):
    """Rebuild and re-verify a serialized certificate against ``prog``."""
    kind = doc.get("kind")
    x = _decode(doc, "x", (prog.n,))
    y = _decode(doc, "y", (prog.m,))
    p = _decode(doc, "p", (prog.n,))
    q = _decode(doc, "q", (prog.m,))
    eps = float(_decode(doc, "eps", ()))
    z = PrimalDual(x, y)
    if kind == "pointwise":
        return pointwise_certificate(prog, z, np.concatenate([p, q]), eps, int(doc.get("index", -1)))
    if kind == "ergodic":
        cert = _ergodic_from_parts(prog, z, p, q, eps, int(doc.get("count", 0)), 200, 0)
        if "eps_prime" in doc:
            stored = float(_decode(doc, "eps_prime", ()))
            if abs(stored - cert.eps_prime) > _tol(stored, cert.eps_prime):
                raise CertificateError("eps_prime_consistency", abs(stored - cert.eps_prime))
        return cert
    raise ValueError(f"certificate field 'kind' must be 'pointwise' or 'ergodic', got {kind!r}")
