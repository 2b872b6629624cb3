import numpy as np
from sklearn.base import BaseEstimator

from .problems import ConvexProgram, PrimalDual, builtin_problem, problem_from_json
from .solver import SolverConfig, run


class RHPEMM(BaseEstimator):
    """Estimator-style front end: ``fit`` solves a convex program.

    ``fit`` accepts a :class:`ConvexProgram`, a registry name, or a
    ``{"family", "params"}`` descriptor.  Fitted attributes are ``x_``,
    ``y_``, ``result_``, ``n_iter_`` and ``converged_``.
    """

    def __init__(self, sigma=0.5, theta=0.25, delta=1e-6, eps=1e-6, max_iters=10_000,
                 abs_floor=1e-12, kappa=1e-4, lambda1=None, check_invariants=True, seed=0):
        self.sigma = sigma
        self.theta = theta
        self.delta = delta
        self.eps = eps
        self.max_iters = max_iters
        self.abs_floor = abs_floor
        self.kappa = kappa
        self.lambda1 = lambda1
        self.check_invariants = check_invariants
        self.seed = seed

    def _config(self):
        return SolverConfig(**self.get_params())

    def fit(self, problem, z0=None):
        if isinstance(problem, str):
            problem = builtin_problem(problem)
        elif isinstance(problem, dict):
            problem = problem_from_json(problem)
        elif not isinstance(problem, ConvexProgram):
            raise TypeError("problem must be a ConvexProgram, registry name or descriptor")
        if z0 is not None and not isinstance(z0, PrimalDual):
            z0 = PrimalDual.from_vector(np.asarray(z0, dtype=float), problem.n)
        result = run(problem, z0, self._config())
        self.result_ = result
        self.x_ = result.z.x.copy()
        self.y_ = result.z.y.copy()
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self
