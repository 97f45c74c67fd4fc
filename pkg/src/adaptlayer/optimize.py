"""BFGS wrapper with expectation-value bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import OptimizerError


@dataclass(frozen=True)
class OptimizerSettings:
    gtol: float = 1e-12
    xrtol: float = 0.0
    maxiter: int | None = None


@dataclass(frozen=True)
class OptimizerResult:
    x: np.ndarray
    fun: float
    n_objective: int
    n_gradient: int
    iterations: int
    message: str

    def expectation_evals(self, n_params: int | None = None) -> int:
        """Objective calls plus ``P + 1`` per gradient, the finite-difference bookkeeping rule."""
        p = len(self.x) if n_params is None else n_params
        return self.n_objective + self.n_gradient * (p + 1)


def bfgs_minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    x0,
    settings: OptimizerSettings = OptimizerSettings(),
) -> OptimizerResult:
    """Minimize with BFGS and a strong-Wolfe line search.

    Args:
        objective: Scalar function of the parameter vector.
        gradient: Its gradient.
        x0: Starting point.
        settings: Tolerances; ``gtol`` bounds the gradient infinity-norm.

    Returns:
        Optimum with call counts. A line search that cannot make progress is
        treated as convergence at the best point found.

    Raises:
        OptimizerError: The objective or gradient returned a non-finite value.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.size == 0:
        return OptimizerResult(x0.copy(), float(objective(x0)), 1, 0, 0, "no parameters")

    def fun(x):
        v = float(objective(x))
        if not np.isfinite(v):
            raise OptimizerError(f"objective returned {v}")
        return v

    def jac(x):
        g = np.asarray(gradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise OptimizerError("gradient has non-finite entries")
        return g

    options = {"gtol": settings.gtol, "xrtol": settings.xrtol}
    if settings.maxiter is not None:
        options["maxiter"] = settings.maxiter
    res = minimize(fun, x0, jac=jac, method="BFGS", options=options)
    if not np.isfinite(res.fun):
        raise OptimizerError(f"optimizer ended at non-finite value: {res.message}")
    return OptimizerResult(np.asarray(res.x, dtype=float), float(res.fun), int(res.nfev), int(res.njev), int(res.nit), str(res.message))
