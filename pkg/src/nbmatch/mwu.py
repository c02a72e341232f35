"""Primal-dual multiplicative-weights solvers for one-sided markets with endowments.

The solvers look for prices p (goods), offsets q (agents) and, for SPLC
utilities, per-unit segment prices h such that every agent's cheapest utility
bundle, bought with budget 1 + c_i * min(price/utility), fits in the matching
polytope. Prices are multiplicative weights over the packing constraints; the
σ-weighted average of the bought bundles converges to an approximate solution.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .instance import InfeasibleInstanceError, Kind, MarketInstance, feasibility_gap
from .oracles import shift

_RENORM = 1e150


@dataclass(frozen=True)
class DualState:
    """Prices ``p`` on goods, offsets ``q`` on agents, per-unit segment prices ``h`` (SPLC)."""

    p: np.ndarray
    q: np.ndarray
    h: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"p": self.p.tolist(), "q": self.q.tolist()}
        if self.h is not None:
            out["h"] = self.h.tolist()
        return out


@dataclass
class MwuTrace:
    """Per-iteration diagnostics; entry t describes the state after t+1 updates."""

    eps: float
    log_phi0: float
    sigma: np.ndarray
    log_phi: np.ndarray
    max_row: np.ndarray
    max_col: np.ndarray
    max_weighted_gain: np.ndarray
    objective: np.ndarray

    def sandwich(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(lower, log_phi, upper) of the potential bound at every iterate."""
        lower = self.eps * (1 - self.eps) * self.max_weighted_gain
        upper = self.log_phi0 + self.eps * np.cumsum(self.sigma)
        return lower, self.log_phi, upper

    def to_csv(self, path: str | Path) -> None:
        """Write the trace; the ``phi`` column holds ln Φ since Φ itself overflows."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "sigma", "phi", "max_row_overload", "max_col_overload", "objective_of_running_average"])
            for t in range(len(self.sigma)):
                wr.writerow(
                    [t + 1]
                    + [repr(float(v)) for v in (self.sigma[t], self.log_phi[t], self.max_row[t], self.max_col[t], self.objective[t])]
                )


@dataclass
class MwuResult:
    x: np.ndarray
    """Feasible allocation: the average scaled into the polytope (and shifted for SPLC)."""
    x_bar: np.ndarray
    """Raw σ-weighted average allocation."""
    duals: DualState
    """σ-weighted average prices."""
    overload: float
    """max(row sum, column sum) of ``x_bar`` minus 1."""
    segment_overload: float
    iterations: int
    eps: float
    trace: MwuTrace
    wall_time: float = 0.0
    cp: np.ndarray = field(default_factory=lambda: np.zeros(0))
    utilities: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def p(self) -> np.ndarray:
        return self.duals.p

    @property
    def q(self) -> np.ndarray:
        return self.duals.q

    @property
    def h(self) -> np.ndarray | None:
        return self.duals.h


def default_iterations(n: int, eps: float, constant: float = 8.0) -> int:
    return math.ceil(constant * 2 * n * math.log(2 * n) / eps**2)


def _segments(inst: MarketInstance) -> tuple[np.ndarray, np.ndarray]:
    if inst.kind is Kind.ONE_SIDED_LINEAR:
        return inst.u[..., None], np.ones(inst.u.shape + (1,))
    if inst.kind is Kind.ONE_SIDED_SPLC:
        return inst.u, inst.lengths
    raise ValueError(f"mwu unsupported for kind {inst.kind.value}")


def _price_grid(inst: MarketInstance, duals: DualState) -> np.ndarray:
    u3, _ = _segments(inst)
    grid = duals.p[None, :, None] + duals.q[:, None, None]
    if duals.h is not None:
        grid = grid + np.reshape(duals.h, u3.shape)
    return grid


def _min_ratio(u3: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per agent: lowest price-per-utility over (good, segment) and its flat index."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(u3 > 0, grid / np.where(u3 > 0, u3, 1.0), np.inf)
    flat = ratio.reshape(ratio.shape[0], -1)
    best = np.argmin(flat, axis=1)
    return flat[np.arange(flat.shape[0]), best], best


def rescale(state: DualState, instance: MarketInstance) -> DualState:
    """Scale prices so that sum p + sum q (+ sum l*h) = n + sum_i c_i * min price/utility."""
    u3, l3 = _segments(instance)
    r, _ = _min_ratio(u3, _price_grid(instance, state))
    total = state.p.sum() + state.q.sum()
    if state.h is not None:
        total += float((np.reshape(state.h, u3.shape) * l3).sum())
    lam = total - float(instance.c @ r)
    if lam <= 0:
        raise InfeasibleInstanceError("price rescaling failed: the feasibility program has no solution")
    s = instance.n / lam
    return DualState(s * state.p, s * state.q, None if state.h is None else s * np.asarray(state.h))


def cp_values(duals: DualState, instance: MarketInstance) -> np.ndarray:
    """CP_i = c_i + max over (good, segment) of utility per unit price."""
    u3, _ = _segments(instance)
    r, _ = _min_ratio(u3, _price_grid(instance, duals))
    return instance.c + 1.0 / r


def best_bundle(i: int, duals: DualState, instance: MarketInstance) -> tuple[np.ndarray, float]:
    """Agent i's budget spent on its best bang-per-buck good (lowest index on ties)."""
    u3, _ = _segments(instance)
    grid = _price_grid(instance, duals)
    r, best = _min_ratio(u3[i:i + 1], grid[i:i + 1])
    budget = 1.0 + instance.c[i] * r[0]
    y = np.zeros(u3.shape[1:])
    j, k = np.unravel_index(best[0], u3.shape[1:])
    y[j, k] = budget / grid[i, j, k]
    if instance.kind is Kind.ONE_SIDED_LINEAR:
        y = y[:, 0]
    return y, float(instance.c[i] + 1.0 / r[0])


def _run(inst: MarketInstance, eps: float, T: int) -> MwuResult:
    u3, l3 = _segments(inst)
    n, _, L = u3.shape
    m = n * L
    c = inst.c
    u2 = u3.reshape(n, m)
    l2 = l3.reshape(n, m)
    good = np.repeat(np.arange(n), L)
    seg = (l2 < 1) & (l2 > 0) & (u2 > 0)
    any_seg = bool(seg.any())
    inv_l = np.where(seg, 1.0 / np.where(seg, l2, 1.0), 0.0)
    with np.errstate(divide="ignore"):
        inv_u = np.where(u2 > 0, 1.0 / np.where(u2 > 0, u2, 1.0), np.inf)
    rows = np.arange(n)

    P, Q, H = np.ones(n), np.ones(n), np.where(seg, 1.0, 0.0)
    log_off = 0.0
    log_phi0 = math.log(2 * n + int(seg.sum()))

    # per-iteration records; averages and diagnostics are assembled after the loop
    rec_best = np.empty((T, n), dtype=np.intp)
    rec_amount = np.empty((T, n))
    rec_d = np.empty((T, n))
    rec_sigma = np.empty(T)
    rec_s = np.empty(T)
    rec_P = np.empty((T, n))
    rec_Q = np.empty((T, n))
    rec_logphi = np.empty(T + 1)
    Hbar = np.zeros((n, m))
    gain_g = np.zeros((n, m))
    max_g = np.zeros(T)

    for t in range(T):
        Pg = P[good] if L > 1 else P
        grid = Pg[None, :] + Q[:, None]
        if any_seg:
            Hl = H * inv_l
            grid = grid + Hl
        ratio = grid * inv_u
        best = ratio.argmin(axis=1)
        r = ratio[rows, best]
        phi = P.sum() + Q.sum() + (H.sum() if any_seg else 0.0)
        rec_logphi[t] = log_off + math.log(phi)
        lam = phi - float(c @ r)
        if lam <= 0:
            raise InfeasibleInstanceError("price rescaling failed: the feasibility program has no solution")
        s = n / lam
        amount = (1.0 + c * (s * r)) / (s * grid[rows, best])
        jj = good[best] if L > 1 else best
        d = np.bincount(jj, weights=amount, minlength=n)
        top = max(d.max(), amount.max())
        if any_seg:
            g = amount * inv_l[rows, best]
            top = max(top, g.max())
        sigma = 1.0 / top if top > 0 else 1.0

        rec_best[t] = best
        rec_amount[t] = amount
        rec_d[t] = d
        rec_sigma[t] = sigma
        rec_s[t] = s
        rec_P[t] = P
        rec_Q[t] = Q
        if any_seg:
            Hbar += (sigma * s) * Hl
            gain_g[rows, best] += sigma * g
            max_g[t] = gain_g.max()
            upd = np.ones((n, m))
            upd[rows, best] += eps * sigma * g
            H = H * np.where(seg, upd, 1.0)

        P = P * (1.0 + eps * sigma * d)
        Q = Q * (1.0 + eps * sigma * amount)
        big = max(P.max(), Q.max(), H.max()) if any_seg else max(P.max(), Q.max())
        if big > _RENORM:
            P, Q, H = P / big, Q / big, H / big
            log_off += math.log(big)
    rec_logphi[T] = log_off + math.log(P.sum() + Q.sum() + (H.sum() if any_seg else 0.0))

    w = rec_sigma * rec_s
    sum_sigma = rec_sigma.sum()
    X = np.zeros((n, m))
    np.add.at(X, (np.broadcast_to(rows, (T, n)), rec_best), rec_sigma[:, None] * rec_amount)
    x_bar = (X / sum_sigma).reshape(n, n, L)
    p_bar = (w @ rec_P) / sum_sigma
    q_bar = (w @ rec_Q) / sum_sigma
    h_bar = (Hbar / sum_sigma).reshape(n, n, L) if any_seg else None

    cum_d = np.cumsum(rec_sigma[:, None] * rec_d, axis=0).max(axis=1)
    cum_h = np.cumsum(rec_sigma[:, None] * rec_amount, axis=0).max(axis=1)
    gains = np.maximum(np.maximum(cum_d, cum_h), max_g)
    bundle_util = rec_amount * u2[rows, rec_best]
    run_util = np.cumsum(rec_sigma[:, None] * bundle_util, axis=0) / np.cumsum(rec_sigma)[:, None]
    slack = run_util - c
    with np.errstate(divide="ignore", invalid="ignore"):
        objective = np.where(np.all(slack > 0, axis=1), np.log(np.where(slack > 0, slack, 1.0)).sum(axis=1), -np.inf)
    trace = MwuTrace(
        eps, log_phi0, rec_sigma, rec_logphi[1:], rec_amount.max(axis=1), rec_d.max(axis=1), gains, objective
    )
    duals = DualState(p_bar, q_bar, h_bar)
    overload = max(x_bar.sum(axis=(1, 2)).max(), x_bar.sum(axis=(0, 2)).max()) - 1.0
    seg_over = float(np.max(x_bar - l3))
    x = x_bar / (1.0 + max(overload, 0.0))
    if inst.kind is Kind.ONE_SIDED_SPLC:
        x = shift(x, l3)
    return MwuResult(x, x_bar, duals, float(overload), seg_over, T, eps, trace)


def _solve(inst: MarketInstance, kind: Kind, eps: float, T: int | None, constant: float, check_feasible: bool) -> MwuResult:
    if inst.kind is not kind:
        raise ValueError(f"mwu unsupported for kind {inst.kind.value}")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if check_feasible and inst.has_endowments:
        feasibility_gap(inst)
    T = default_iterations(inst.n, eps, constant) if T is None else int(T)
    start = time.perf_counter()
    res = _run(inst, eps, T)
    res.wall_time = time.perf_counter() - start
    u3, _ = _segments(inst)
    res.utilities = np.einsum("ijk,ijk->i", u3, res.x_bar.reshape(u3.shape))
    res.cp = cp_values(res.duals, inst)
    if kind is Kind.ONE_SIDED_LINEAR:
        res.x, res.x_bar = res.x[..., 0], res.x_bar[..., 0]
    return res


def solve_liad(
    instance: MarketInstance,
    eps: float,
    T: int | None = None,
    *,
    constant: float = 8.0,
    check_feasible: bool = True,
) -> MwuResult:
    """Multiplicative weights for one-sided linear markets (with or without endowments)."""
    return _solve(instance, Kind.ONE_SIDED_LINEAR, eps, T, constant, check_feasible)


def solve_sad(
    instance: MarketInstance,
    eps: float,
    T: int | None = None,
    *,
    constant: float = 8.0,
    check_feasible: bool = True,
) -> MwuResult:
    """Multiplicative weights for one-sided SPLC markets.

    Segment caps x_ijk <= l_ijk with l_ijk < 1 get their own experts whose gain is
    the fill fraction x_ijk / l_ijk; their per-unit price is the expert weight
    over l_ijk. Caps with l_ijk = 1 are implied by the agent budget and need none.
    """
    return _solve(instance, Kind.ONE_SIDED_SPLC, eps, T, constant, check_feasible)
