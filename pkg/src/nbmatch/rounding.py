"""Lottery rounding of bipartite fractional matchings (Birkhoff-von Neumann)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

OVERLOAD_TOL = 1e-9
_ZERO = 1e-13


@dataclass
class LotteryDecomposition:
    weights: np.ndarray
    matchings: np.ndarray
    """``matchings[m, i]`` is the good assigned to agent i in term m."""
    completed: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        n = self.matchings.shape[1]
        out = np.zeros((n, n))
        for lam, perm in zip(self.weights, self.matchings):
            out[np.arange(n), perm] += lam
        return out

    def expected_utilities(self, u: np.ndarray) -> np.ndarray:
        n = self.matchings.shape[1]
        return self.weights @ u[np.arange(n), self.matchings]

    def to_json(self) -> list[dict]:
        return [{"weight": float(w), "matching": [int(j) for j in m]} for w, m in zip(self.weights, self.matchings)]


def complete_to_doubly_stochastic(x: np.ndarray) -> np.ndarray:
    """Pack leftover row and column capacity greedily, north-west corner first."""
    x = np.array(x, dtype=float)
    if np.any(x < -OVERLOAD_TOL):
        raise ValueError("allocation has negative entries")
    x = np.maximum(x, 0.0)
    n = x.shape[0]
    row_left = 1.0 - x.sum(axis=1)
    col_left = 1.0 - x.sum(axis=0)
    if min(row_left.min(), col_left.min()) < -OVERLOAD_TOL:
        raise ValueError("allocation overloads a row or column beyond tolerance")
    row_left = np.maximum(row_left, 0.0)
    col_left = np.maximum(col_left, 0.0)
    i = j = 0
    while i < n and j < n:
        amt = min(row_left[i], col_left[j])
        x[i, j] += amt
        row_left[i] -= amt
        col_left[j] -= amt
        if row_left[i] <= _ZERO:
            i += 1
        else:
            j += 1
    return x


def bvn_decompose(x: np.ndarray) -> LotteryDecomposition:
    """Write the completed matrix as a convex combination of permutation matrices.

    Each round finds a perfect matching inside the remaining support (the
    max-product one, which exists by Hall's theorem), subtracts its smallest
    entry and zeroes that entry exactly, so every round shrinks the support.
    SPLC allocations (3-d) are collapsed to per-(agent, good) totals first.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:
        x = x.sum(axis=2)
    full = complete_to_doubly_stochastic(x)
    n = full.shape[0]
    rest = full.copy()
    rows = np.arange(n)
    weights, perms = [], []
    remaining = 1.0
    while remaining > _ZERO and len(weights) <= n * n:
        support = rest > _ZERO
        with np.errstate(divide="ignore"):
            score = np.where(support, np.log(np.where(support, rest, 1.0)), -1e6)
        _, perm = linear_sum_assignment(score, maximize=True)
        if not np.all(support[rows, perm]):
            break
        vals = rest[rows, perm]
        lam = float(vals.min())
        rest[rows, perm] -= lam
        rest[rows[vals == lam], perm[vals == lam]] = 0.0
        rest[rest < _ZERO] = 0.0
        weights.append(lam)
        perms.append(perm.copy())
        remaining -= lam
    return LotteryDecomposition(np.array(weights), np.array(perms, dtype=int).reshape(-1, n), full)


def sample_matching(dec: LotteryDecomposition, seed: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = dec.weights / dec.weights.sum()
    return dec.matchings[rng.choice(len(p), p=p)].copy()
