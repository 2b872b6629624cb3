"""Large-step relaxed hybrid proximal extragradient method of multipliers
for smooth convex programs with inequality constraints."""

from .certificates import (CertificateError, ErgodicCertificate, PointwiseCertificate,
                           ergodic_certificate, pointwise_certificate, transpose_conditions)
from .estimator import RHPEMM
from .problems import ConvexProgram, PrimalDual, builtin_problem, kkt_error
from .solver import SolveResult, SolverConfig, complexity_budget, run

__all__ = [
    "RHPEMM", "ConvexProgram", "PrimalDual", "builtin_problem", "kkt_error",
    "SolverConfig", "SolveResult", "run", "complexity_budget",
    "PointwiseCertificate", "ErgodicCertificate", "CertificateError",
    "pointwise_certificate", "ergodic_certificate", "transpose_conditions",
]
__version__ = "0.1.0"
