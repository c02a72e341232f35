"""Brute-force grid search for the Nash-bargaining optimum of tiny linear instances.

Independent of the iterative solvers: it only evaluates the exact log objective
on grids over a parameterization of the polytope. One-parameter polytopes are
scanned exhaustively at ``resolution`` and then around the incumbent at
``refine``. Higher-dimensional polytopes start from a coarse exhaustive grid and
zoom in, re-centring a local grid on the incumbent and halving its step until
the step reaches ``refine``; the objective is concave, so the zoom cannot be
trapped away from the optimum except by grid error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instance import Kind, MarketInstance

_MAX_POINTS = 200_000
_TOL = 1e-12


@dataclass(frozen=True)
class OracleResult:
    x: np.ndarray
    objective: float
    resolution: float
    utilities: np.ndarray
    error_bound: float


class _Bipartite:
    """Doubly stochastic n x n matrices for n <= 3, by their free upper-left block."""

    def __init__(self, n: int):
        self.n = n
        self.dim = (n - 1) ** 2

    def embed(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, N = self.n, theta.shape[0]
        x = np.empty((N, n, n))
        if n == 1:
            x[:] = 1.0
            return x, np.ones(N, dtype=bool)
        k = n - 1
        block = theta.reshape(N, k, k)
        x[:, :k, :k] = block
        x[:, :k, k] = 1.0 - block.sum(axis=2)
        x[:, k, :k] = 1.0 - block.sum(axis=1)
        x[:, k, k] = 1.0 - x[:, :k, k].sum(axis=1)
        ok = np.all(x >= -_TOL, axis=(1, 2))
        return np.clip(x, 0.0, 1.0), ok


class _Edges:
    """Fractional matchings of the complete graph on n <= 4 vertices, by edge values."""

    def __init__(self, n: int):
        self.n = n
        self.iu, self.ju = np.triu_indices(n, 1)
        self.dim = len(self.iu)
        self.odd = [s for size in range(3, n + 1, 2) for s in itertools.combinations(range(n), size)]

    def embed(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, N = self.n, theta.shape[0]
        x = np.zeros((N, n, n))
        x[:, self.iu, self.ju] = theta
        x[:, self.ju, self.iu] = theta
        ok = np.all(x.sum(axis=2) <= 1 + _TOL, axis=1)
        for s in self.odd:
            inside = np.isin(self.iu, s) & np.isin(self.ju, s)
            ok &= theta[:, inside].sum(axis=1) <= (len(s) - 1) // 2 + _TOL
        return x, ok


def _objective(inst: MarketInstance, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    util = np.einsum("ij,nij->ni", inst.u, x)
    slack = util - inst.c
    with np.errstate(divide="ignore"):
        val = np.where(np.all(slack > 0, axis=1), np.log(np.where(slack > 0, slack, 1.0)).sum(axis=1), -np.inf)
    return val, util


def _grid(center: np.ndarray, step: float, half: int) -> np.ndarray:
    offsets = np.arange(-half, half + 1) * step
    axes = [np.unique(np.clip(c + offsets, 0.0, 1.0)) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_solve(instance: MarketInstance, resolution: float = 1e-3, refine: float = 1e-5) -> OracleResult:
    """Grid maximizer of sum_i log(u_i(x) - c_i) for n <= 3 bipartite or n <= 4 non-bipartite."""
    inst = instance
    n = inst.n
    if inst.kind is Kind.ONE_SIDED_LINEAR:
        if n > 3:
            raise ValueError("grid_solve handles bipartite instances with n <= 3 only")
        poly = _Bipartite(n)
    elif inst.kind is Kind.NON_BIPARTITE_LINEAR:
        if n > 4:
            raise ValueError("grid_solve handles non-bipartite instances with n <= 4 only")
        poly = _Edges(n)
    else:
        raise ValueError(f"grid_solve does not support kind {inst.kind.value}")
    refine = min(refine, resolution)

    def evaluate(theta: np.ndarray):
        x, ok = poly.embed(theta)
        val, _ = _objective(inst, x)
        val = np.where(ok, val, -np.inf)
        k = int(np.argmax(val))
        return theta[k], float(val[k])

    d = poly.dim
    if d == 0:
        best, best_val = np.zeros(0), evaluate(np.zeros((1, 0)))[1]
        step = resolution
    elif d == 1:
        best, best_val = evaluate(np.linspace(0.0, 1.0, round(1 / resolution) + 1)[:, None])
        step = resolution
        if refine < resolution:
            cand, val = evaluate(_grid(best, refine, math.ceil(resolution / refine)))
            if val > best_val:
                best, best_val = cand, val
            step = refine
    else:
        m = max(2, int(_MAX_POINTS ** (1.0 / d)) - 1)
        best_val = -np.inf
        while best_val == -np.inf and m <= 4096:
            best, best_val = evaluate(_grid(np.full(d, 0.5), 1.0 / m, m))
            m *= 2
        step = 1.0 / (m // 2)
        half = 3 if d <= 4 else 2
        while True:
            for _ in range(1000):
                cand, val = evaluate(_grid(best, step, half))
                if val <= best_val:
                    break
                best, best_val = cand, val
            if step <= refine:
                break
            step = max(step / 2, refine)

    x, _ = poly.embed(np.asarray(best, dtype=float)[None, :])
    x = x[0]
    util = np.einsum("ij,ij->i", inst.u, x)
    slack = util - inst.c
    lipschitz = max(d, 1) * float(np.sum(inst.u.sum(axis=1) / slack)) if np.all(slack > 0) else math.inf
    return OracleResult(x, best_val, step, util, lipschitz * step)
