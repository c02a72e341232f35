"""Post-hoc certificates: Nash objective, KKT residuals, feasibility, proportionality, deviation gains."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .instance import Kind, MarketInstance
from .mwu import DualState

SUPPORT_THRESHOLD = 1e-7


def nash_objective(x: np.ndarray, instance: MarketInstance) -> float:
    """sum_i log(u_i(x) - c_i) (+ job terms); -inf when anyone is at or below disagreement."""
    slack = instance.agent_utilities(x) - instance.c
    if instance.two_sided:
        slack = np.concatenate([slack, instance.job_utilities(x) - instance.d])
    if np.any(slack <= 0):
        return -math.inf
    return float(np.sum(np.log(slack)))


@dataclass(frozen=True)
class FeasibilityReport:
    row_overload: float
    col_overload: float
    segment_overload: float
    min_entry: float
    eps: float

    @property
    def overload(self) -> float:
        return max(self.row_overload, self.col_overload, self.segment_overload)

    @property
    def ok(self) -> bool:
        return self.overload <= self.eps and self.min_entry >= -1e-12


def approx_feasibility(x: np.ndarray, eps: float, lengths: np.ndarray | None = None) -> FeasibilityReport:
    """Largest additive violation of the unit row/column budgets (and segment caps)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 3:
        rows, cols = x.sum(axis=(1, 2)), x.sum(axis=(0, 2))
    else:
        rows, cols = x.sum(axis=1), x.sum(axis=0)
    seg = float(np.max(x - lengths, initial=0.0)) if lengths is not None else 0.0
    return FeasibilityReport(
        max(float(rows.max()) - 1.0, 0.0),
        max(float(cols.max()) - 1.0, 0.0),
        max(seg, 0.0),
        float(x.min()) if x.size else 0.0,
        eps,
    )


def _gradient_ratios(x: np.ndarray, inst: MarketInstance) -> np.ndarray:
    """u_ij(k)/(u_i(x) - c_i) (+ w_ijk/(w_j(x) - d_j)); +inf where a slack is not positive."""
    slack = inst.agent_utilities(x) - inst.c
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(slack > 0, 1.0 / np.where(slack > 0, slack, 1.0), np.inf)
        if inst.is_splc:
            r = np.where(inst.u > 0, inst.u * inv[:, None, None], 0.0)
            if inst.two_sided:
                js = inst.job_utilities(x) - inst.d
                jinv = np.where(js > 0, 1.0 / np.where(js > 0, js, 1.0), np.inf)
                r = r + np.where(inst.w > 0, inst.w * jinv[None, :, None], 0.0)
        else:
            r = np.where(inst.u > 0, inst.u * inv[:, None], 0.0)
    return r


@dataclass(frozen=True)
class Certificate:
    objective: float
    row_violation: float
    col_violation: float
    segment_violation: float
    stationarity: float
    """max over entries of (u_ij/(u_i - c_i) - p_j - q_i - h_ijk)_+."""
    complementarity: float
    """max over entries with x > threshold of |p_j + q_i + h_ijk - u_ij/(u_i - c_i)|."""
    complementarity_weighted: float
    """The same deviation averaged with weights x."""
    price_slackness: float
    """max of p_j * (1 - column sum)_+, q_i * (1 - row sum)_+, h_ijk * (l_ijk - x_ijk)_+."""
    fw_gap: float | None = None
    duals_fitted: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def fit_duals(x: np.ndarray, instance: MarketInstance, threshold: float = SUPPORT_THRESHOLD, tight: float = 1e-6) -> DualState:
    """Prices closest (in max deviation) to satisfying the KKT conditions at ``x``.

    Prices may be positive only on tight constraints; on the support they should
    equal the gradient ratios and elsewhere dominate them. Solved as an LP.
    """
    inst = instance
    n = inst.n
    x = np.asarray(x, dtype=float)
    r = _gradient_ratios(x, inst)
    if not np.all(np.isfinite(r)):
        return DualState(np.zeros(n), np.zeros(n), np.zeros(inst.u.shape) if inst.is_splc else None)
    shape = inst.u.shape
    L = shape[2] if inst.is_splc else 1
    r3 = r.reshape(n, n, L)
    x3 = x.reshape(n, n, L)
    rows, cols = x3.sum(axis=(1, 2)), x3.sum(axis=(0, 2))
    p_free = cols >= 1 - tight
    q_free = rows >= 1 - tight
    if inst.is_splc:
        h_free = x3 >= inst.lengths - tight
        h_free &= inst.lengths > 0
    else:
        h_free = np.zeros((n, n, 1), dtype=bool)
    h_idx = -np.ones((n, n, L), dtype=int)
    h_idx[h_free] = np.arange(int(h_free.sum()))
    nv = 2 * n + int(h_free.sum()) + 1  # p, q, h, t
    t_col = nv - 1
    A_rows, A_cols, A_vals, b = [], [], [], []
    row = 0

    def add(entries, rhs):
        nonlocal row
        for col, val in entries:
            A_rows.append(row)
            A_cols.append(col)
            A_vals.append(val)
        b.append(rhs)
        row += 1

    for i in range(n):
        for j in range(n):
            for k in range(L):
                if inst.is_splc and inst.lengths[i, j, k] <= 0:
                    continue
                terms = [(j, 1.0), (n + i, 1.0)]
                if h_idx[i, j, k] >= 0:
                    terms.append((2 * n + h_idx[i, j, k], 1.0))
                rij = float(r3[i, j, k])
                # p + q + h >= r - t
                add([(c, -v) for c, v in terms] + [(t_col, -1.0)], -rij)
                if x3[i, j, k] > threshold:
                    add(terms + [(t_col, -1.0)], rij)
    A = sparse.csr_matrix((A_vals, (A_rows, A_cols)), shape=(row, nv))
    bounds = [(0, None if p_free[j] else 0) for j in range(n)]
    bounds += [(0, None if q_free[i] else 0) for i in range(n)]
    bounds += [(0, None)] * int(h_free.sum()) + [(0, None)]
    cost = np.zeros(nv)
    cost[t_col] = 1.0
    res = linprog(cost, A_ub=A, b_ub=np.array(b), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dual fitting failed: {res.message}")
    p, q = res.x[:n], res.x[n:2 * n]
    h = None
    if inst.is_splc:
        h = np.zeros(shape)
        h[h_free] = res.x[2 * n:2 * n + int(h_free.sum())]
    return DualState(p, q, h)


def kkt_residual(
    x: np.ndarray,
    duals: DualState | None,
    instance: MarketInstance,
    threshold: float = SUPPORT_THRESHOLD,
    fw_gap: float | None = None,
    tight: float = 1e-6,
) -> Certificate:
    """KKT violations of ``x`` with the given prices; fitted prices when ``duals`` is None.

    For the non-bipartite kind only degree feasibility and the supplied FW gap are
    certified, since odd-set prices are not represented. Fitted prices may be
    positive only on constraints within ``tight`` of binding.
    """
    inst = instance
    x = np.asarray(x, dtype=float)
    n = inst.n
    obj = nash_objective(x, inst)
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        deg = x.sum(axis=1)
        viol = max(float(deg.max()) - 1.0, 0.0)
        return Certificate(obj, viol, viol, 0.0, 0.0, 0.0, 0.0, 0.0, fw_gap, False)
    fitted = duals is None
    if fitted:
        duals = fit_duals(x, inst, threshold, tight)
    L = inst.u.shape[2] if inst.is_splc else 1
    x3 = x.reshape(n, n, L)
    r3 = _gradient_ratios(x, inst).reshape(n, n, L)
    price = duals.p[None, :, None] + duals.q[:, None, None]
    if duals.h is not None:
        price = price + np.reshape(duals.h, (n, n, L))
    live = (inst.lengths > 0) if inst.is_splc else np.ones((n, n, 1), dtype=bool)
    with np.errstate(invalid="ignore"):
        dev = r3 - price
    stationarity = float(np.max(np.where(live, np.maximum(dev, 0.0), 0.0)))
    support = (x3 > threshold) & live
    comp = float(np.max(np.abs(dev[support]), initial=0.0))
    mass = x3[support].sum()
    comp_w = float(np.sum(x3[support] * np.abs(dev[support])) / mass) if mass > 0 else 0.0
    rows, cols = x3.sum(axis=(1, 2)), x3.sum(axis=(0, 2))
    slack_terms = [duals.p * np.maximum(1 - cols, 0.0), duals.q * np.maximum(1 - rows, 0.0)]
    seg_viol = 0.0
    if inst.is_splc:
        seg_viol = max(float(np.max(x3 - inst.lengths)), 0.0)
        if duals.h is not None:
            slack_terms.append(np.reshape(duals.h, (n, n, L)) * np.maximum(inst.lengths - x3, 0.0))
    price_slack = float(max(np.max(s, initial=0.0) for s in slack_terms))
    return Certificate(
        obj,
        max(float(rows.max()) - 1.0, 0.0),
        max(float(cols.max()) - 1.0, 0.0),
        seg_viol,
        stationarity,
        comp,
        comp_w,
        price_slack,
        fw_gap,
        fitted,
    )


@dataclass(frozen=True)
class ProportionalityReport:
    margins: np.ndarray
    bounds: np.ndarray
    job_margins: np.ndarray | None = None

    def ok(self, tol: float = 1e-6) -> bool:
        good = bool(np.all(self.margins >= -tol))
        if self.job_margins is not None:
            good &= bool(np.all(self.job_margins >= -tol))
        return good

    @property
    def min_margin(self) -> float:
        m = float(self.margins.min())
        if self.job_margins is not None:
            m = min(m, float(self.job_margins.min()))
        return m


def proportionality_bounds(instance: MarketInstance, delta: float | None = None, kappa: float | None = None) -> np.ndarray:
    """Utility above disagreement that every optimum guarantees each agent (then each job)."""
    inst = instance
    n = inst.n
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        if inst.has_endowments:
            raise ValueError("no proportionality guarantee for non-bipartite instances with endowments")
        return inst.equal_share() / (2 * n * n)
    if inst.has_endowments or inst.two_sided:
        if delta is None:
            if inst.has_endowments:
                raise ValueError("delta is required for instances with endowments")
            from .instance import DELTA_MAX

            delta = DELTA_MAX
        if kappa is None:
            from .instance import normalize

            kappa = normalize(inst)[1].kappa
        size = 2 * n if inst.two_sided else n
        return np.full(size, 1.0 / (2 * n * n * (1 + 1 / delta) * kappa))
    return inst.equal_share() / (2 * n)


def proportionality_check(
    x: np.ndarray, instance: MarketInstance, delta: float | None = None, kappa: float | None = None
) -> ProportionalityReport:
    """Per-agent margin u_i(x) - c_i - bound. Endowment bounds hold for normalized instances."""
    inst = instance
    bounds = proportionality_bounds(inst, delta, kappa)
    margins = inst.agent_utilities(x) - inst.c - bounds[: inst.n]
    job = None
    if inst.two_sided:
        job = inst.job_utilities(x) - inst.d - bounds[inst.n:]
    return ProportionalityReport(margins, bounds, job)


@dataclass(frozen=True)
class DeviationReport:
    feasible_gain: np.ndarray
    """Per agent: best utility from re-choosing its own row within residual capacities, minus u_i(x)."""
    price_gain: np.ndarray | None
    """Per agent: CP_i at the given prices minus u_i(x)."""

    @property
    def max_feasible_gain(self) -> float:
        return float(self.feasible_gain.max())

    @property
    def max_price_gain(self) -> float | None:
        return None if self.price_gain is None else float(self.price_gain.max())


def best_response_gain(x: np.ndarray, instance: MarketInstance, duals: DualState | None = None) -> DeviationReport:
    """Both readings of an agent's unilateral gain, reported separately.

    The feasible reading lets agent i replace its row by any row that fits its
    budget and the capacity other agents leave on each good (a fractional
    knapsack, solved greedily by slope). The price reading compares u_i(x) with
    the best bundle affordable at ``duals``.
    """
    inst = instance
    x = np.asarray(x, dtype=float)
    n = inst.n
    util = inst.agent_utilities(x)
    if inst.is_splc:
        slopes, caps = inst.u, inst.lengths
        used = x.sum(axis=2)
    else:
        slopes, caps = inst.u[..., None], np.ones(inst.u.shape + (1,))
        used = x
    col = used.sum(axis=0)
    gains = np.empty(n)
    for i in range(n):
        if inst.kind is Kind.NON_BIPARTITE_LINEAR:
            residual = np.maximum(1.0 - (used.sum(axis=1) - used[:, i]), 0.0)
            residual[i] = 0.0
        else:
            residual = np.maximum(1.0 - (col - used[i]), 0.0)
        order = np.argsort(-slopes[i].ravel(), kind="stable")
        budget, value = 1.0, 0.0
        left = residual.copy()
        L = slopes.shape[2]
        for flat in order:
            j, k = divmod(int(flat), L)
            s = slopes[i, j, k]
            if s <= 0 or budget <= 0:
                break
            take = min(caps[i, j, k], left[j], budget)
            if take > 0:
                value += s * take
                left[j] -= take
                budget -= take
        gains[i] = value - util[i]
    price_gain = None
    if duals is not None:
        from .mwu import cp_values

        price_gain = cp_values(duals, inst) - util
    return DeviationReport(gains, price_gain)
