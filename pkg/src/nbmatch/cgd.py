"""Conditional-gradient (Frank-Wolfe) solvers on a smoothed Nash objective.

The log objective is replaced below a per-model threshold x0 by its
second-order Taylor model, which makes it smooth on the whole polytope while
leaving the optimum unchanged: every optimum gives each agent at least x0.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .instance import (
    DELTA_MAX,
    Kind,
    MarketInstance,
    ScalingInfo,
    feasibility_gap,
    normalize,
)
from .oracles import (
    max_weight_bipartite_matching,
    max_weight_capacitated_assignment,
    max_weight_general_matching,
    shift,
)


def eta(x, x0):
    """log x above x0; its quadratic Taylor model at x0 below."""
    x = np.asarray(x, dtype=float)
    z = (x - x0) / x0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > x0, np.log(np.where(x > x0, x, 1.0)), math.log(x0) + z - 0.5 * z * z)


def eta_prime(x, x0):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > x0, 1.0 / np.where(x > x0, x, 1.0), (2 * x0 - x) / (x0 * x0))


@dataclass(frozen=True)
class SmoothedObjective:
    kind: Kind
    x0: float
    kappa: float
    delta: float | None
    L: float
    n: int

    @property
    def diameter_sq(self) -> float:
        return 4.0 * self.n

    def iteration_cap(self, eps: float) -> int:
        return math.ceil(self.diameter_sq * self.L / eps)


def smoothed_objective(instance: MarketInstance, kappa: float, delta: float | None = None) -> SmoothedObjective:
    """Threshold x0 and smoothness constant for the instance's model."""
    inst = instance
    n = inst.n
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        if inst.has_endowments:
            raise ValueError("the non-bipartite solver supports only zero disagreement utilities")
        x0 = 1.0 / (2 * kappa * n * n)
        return SmoothedObjective(inst.kind, x0, kappa, None, 1.0 / x0**2, n)
    if inst.two_sided or inst.has_endowments:
        if delta is None:
            delta = DELTA_MAX if not inst.has_endowments else None
        if delta is None or delta <= 0:
            raise ValueError("a positive feasibility gap delta is required for endowment models")
        x0 = 1.0 / (2 * n * n * (1 + 1 / delta) * kappa)
        L = (2.0 if inst.two_sided else 1.0) / x0**2
        return SmoothedObjective(inst.kind, x0, kappa, delta, L, n)
    x0 = 1.0 / (2 * kappa * n)
    return SmoothedObjective(inst.kind, x0, kappa, None, 1.0 / x0**2, n)


def _slacks(x: np.ndarray, inst: MarketInstance) -> np.ndarray:
    a = inst.agent_utilities(x) - inst.c
    if inst.two_sided:
        a = np.concatenate([a, inst.job_utilities(x) - inst.d])
    return a


def psi(x: np.ndarray, instance: MarketInstance, obj: SmoothedObjective) -> float:
    return float(eta(_slacks(x, instance), obj.x0).sum())


def psi_and_grad(x: np.ndarray, instance: MarketInstance, obj: SmoothedObjective) -> tuple[float, np.ndarray]:
    inst = instance
    x = np.asarray(x, dtype=float)
    a = _slacks(x, inst)
    value = float(eta(a, obj.x0).sum())
    g = eta_prime(a, obj.x0)
    n = inst.n
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        G = inst.u * g[:, None]
        grad = G + G.T
        np.fill_diagonal(grad, 0.0)
    elif inst.is_splc:
        grad = inst.u * g[:n, None, None]
        if inst.two_sided:
            grad = grad + inst.w * g[None, n:, None]
    else:
        grad = inst.u * g[:, None]
    return value, grad


def inner(instance: MarketInstance, a: np.ndarray, b: np.ndarray) -> float:
    """Inner product over the allocation's free coordinates (edges for non-bipartite)."""
    if instance.kind is Kind.NON_BIPARTITE_LINEAR:
        iu, ju = np.triu_indices(instance.n, 1)
        return float(np.dot(a[iu, ju], b[iu, ju]))
    return float(np.vdot(a, b))


def linear_oracle(instance: MarketInstance, weights: np.ndarray) -> np.ndarray:
    """A polytope vertex maximizing the linear function ``weights``."""
    inst = instance
    weights = np.maximum(weights, 0.0)
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        return max_weight_general_matching(weights).x
    if inst.is_splc:
        return max_weight_capacitated_assignment(weights, inst.lengths).x
    return max_weight_bipartite_matching(weights).x


def fw_gap(x: np.ndarray, instance: MarketInstance, obj: SmoothedObjective) -> float:
    """max over the polytope of grad psi(x) . (v - x); an upper bound on psi* - psi(x)."""
    _, grad = psi_and_grad(x, instance, obj)
    y = linear_oracle(instance, grad)
    return inner(instance, grad, y - x)


@dataclass
class FwTrace:
    t: list[int] = field(default_factory=list)
    psi: list[float] = field(default_factory=list)
    fw_gap: list[float] = field(default_factory=list)
    min_utility_minus_c: list[float] = field(default_factory=list)
    step_size: list[float] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "psi", "fw_gap", "min_utility_minus_c", "step_size"])
            for row in zip(self.t, self.psi, self.fw_gap, self.min_utility_minus_c, self.step_size):
                wr.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    gap: float
    """FW gap certified at the returned point."""
    min_gap: float
    psi: float
    utilities: np.ndarray
    objective: SmoothedObjective
    scaling: ScalingInfo
    max_iters: int
    step: str
    trace: FwTrace
    wall_time: float = 0.0
    job_utilities: np.ndarray | None = None


def _line_search(a: np.ndarray, b: np.ndarray, x0: float) -> float:
    """Exact maximizer over [0, 1] of sum eta(a + s b): the root of its decreasing derivative."""

    def slope(s: float) -> float:
        return float(np.dot(b, eta_prime(a + s * b, x0)))

    if slope(1.0) >= 0:
        return 1.0
    if slope(0.0) <= 0:
        return 0.0
    return brentq(slope, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def fw_solve(
    instance: MarketInstance,
    eps: float,
    max_iters: int | None = None,
    *,
    step: str = "standard",
    delta: float | None = None,
    record_trace: bool = True,
) -> tuple[np.ndarray, SolveReport]:
    """Frank-Wolfe from x = 0 until the FW gap drops to ``eps``.

    ``step="standard"`` uses step size 2/(t+1). ``step="line_search"`` takes the
    exact maximizing step along the FW direction, which keeps the same
    worst-case guarantee and is much faster when the optimum is degenerate.
    SPLC iterates are pushed onto leading segments after every step.
    ``delta`` overrides the feasibility-gap computation for endowment models.
    """
    if step not in ("standard", "line_search"):
        raise ValueError("step must be 'standard' or 'line_search'")
    if eps <= 0:
        raise ValueError("eps must be positive")
    start = time.perf_counter()
    inst, scaling = normalize(instance)
    if inst.has_endowments:
        if delta is None:
            delta, _ = feasibility_gap(inst)
        elif delta <= 0:
            raise ValueError("delta must be positive")
    elif inst.two_sided:
        delta = DELTA_MAX
    else:
        delta = None
    scaling = replace(scaling, delta=delta)
    obj = smoothed_objective(inst, scaling.kappa, delta)
    cap = obj.iteration_cap(eps) if max_iters is None else int(max_iters)

    x = np.zeros(inst.allocation_shape)
    trace = FwTrace()
    converged = False
    gap = math.inf
    min_gap = math.inf
    value = psi(x, inst, obj)
    t = 0
    while t < cap:
        t += 1
        value, grad = psi_and_grad(x, inst, obj)
        y = linear_oracle(inst, grad)
        gap = inner(inst, grad, y - x)
        min_gap = min(min_gap, gap)
        slack = _slacks(x, inst)
        if gap <= eps:
            converged = True
            if record_trace:
                trace.t.append(t)
                trace.psi.append(value)
                trace.fw_gap.append(gap)
                trace.min_utility_minus_c.append(float(slack.min()))
                trace.step_size.append(0.0)
            break
        if inst.is_splc:
            y = shift(y, inst.lengths)
        if step == "standard":
            alpha = 2.0 / (t + 1)
        else:
            alpha = _line_search(slack, _direction_utils(inst, y - x), obj.x0)
        if record_trace:
            trace.t.append(t)
            trace.psi.append(value)
            trace.fw_gap.append(gap)
            trace.min_utility_minus_c.append(float(slack.min()))
            trace.step_size.append(alpha)
        x = (1.0 - alpha) * x + alpha * y
        if inst.is_splc:
            x = shift(x, inst.lengths)
    if not converged:
        # certify the final iterate
        value, grad = psi_and_grad(x, inst, obj)
        gap = inner(inst, grad, linear_oracle(inst, grad) - x)
        min_gap = min(min_gap, gap)
        converged = gap <= eps
    report = SolveReport(
        iterations=t,
        converged=converged,
        gap=gap,
        min_gap=min_gap,
        psi=value,
        utilities=instance.agent_utilities(x),
        objective=obj,
        scaling=scaling,
        max_iters=cap,
        step=step,
        trace=trace,
        wall_time=time.perf_counter() - start,
        job_utilities=instance.job_utilities(x) if inst.two_sided else None,
    )
    return x, report


def _direction_utils(inst: MarketInstance, direction: np.ndarray) -> np.ndarray:
    b = inst.agent_utilities(direction)
    if inst.two_sided:
        b = np.concatenate([b, inst.job_utilities(direction)])
    return b
