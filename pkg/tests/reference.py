"""Test-side reference optimum for tiny instances, solved by a general NLP method."""

import numpy as np
from scipy.optimize import minimize

from nbmatch.cgd import _slacks
from nbmatch.instance import Kind, MarketInstance, polytope_constraints


def slsqp_optimum(inst: MarketInstance, x_start: np.ndarray) -> np.ndarray:
    """Maximize the exact log objective from a strictly positive start with SLSQP."""
    shape = inst.u.shape
    A, b, upper = polytope_constraints(inst)
    A = A.toarray()
    n = inst.n

    def f(v):
        s = _slacks(v.reshape(shape), inst)
        return -np.sum(np.log(np.maximum(s, 1e-300)))

    def grad(v):
        s = np.maximum(_slacks(v.reshape(shape), inst), 1e-300)
        if inst.kind is Kind.ONE_SIDED_LINEAR:
            g = inst.u / s[:, None]
        else:
            g = inst.u / s[:n, None, None]
            if inst.two_sided:
                g = g + inst.w / s[None, n:, None]
        return -g.ravel()

    res = minimize(
        f,
        np.asarray(x_start, dtype=float).ravel(),
        jac=grad,
        method="SLSQP",
        bounds=list(zip(np.zeros(A.shape[1]), upper)),
        constraints=[{"type": "ineq", "fun": lambda v: b - A @ v, "jac": lambda v: -A}],
        options={"ftol": 1e-15, "maxiter": 2000},
    )
    return np.clip(res.x, 0.0, upper).reshape(shape)
