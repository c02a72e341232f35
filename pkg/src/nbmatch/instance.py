"""Market instances: data model, validation, normalization, feasibility gap, generators."""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

DELTA_MAX = 1e6
"""Cap on the feasibility gap; also the value reported for instances without endowments."""


class Kind(str, enum.Enum):
    ONE_SIDED_LINEAR = "OneSidedLinear"
    ONE_SIDED_SPLC = "OneSidedSPLC"
    TWO_SIDED_SPLC = "TwoSidedSPLC"
    NON_BIPARTITE_LINEAR = "NonBipartiteLinear"


class InstanceError(ValueError):
    """Malformed instance data; ``field`` names the offending input field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class DegenerateInstanceError(InstanceError):
    pass


class InfeasibleInstanceError(ValueError):
    """No allocation gives every agent strictly more than its disagreement utility."""


def _frozen(a: Any, ndim: int | None = None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise InstanceError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarketInstance:
    """A matching market.

    ``u`` is ``(n, n)`` for linear kinds and ``(n, n, L)`` for SPLC kinds, where
    ``lengths[i, j, k]`` is the length of segment ``k`` of agent ``i`` for good ``j``.
    ``w`` holds per-segment job utilities for the two-sided kind. For the
    non-bipartite kind ``u[i, j]`` is agent ``i``'s utility for being matched to ``j``.
    """

    kind: Kind
    u: np.ndarray
    c: np.ndarray | None = None
    lengths: np.ndarray | None = None
    w: np.ndarray | None = None
    d: np.ndarray | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        splc = kind in (Kind.ONE_SIDED_SPLC, Kind.TWO_SIDED_SPLC)
        u = _frozen(self.u, 3 if splc else 2)
        n = u.shape[0]
        if u.shape[1] != n:
            raise InstanceError(f"utilities must be n x n, got shape {u.shape}", "utilities")
        object.__setattr__(self, "u", u)
        c = np.zeros(n) if self.c is None else self.c
        object.__setattr__(self, "c", _frozen(c, 1))
        if self.c.shape != (n,):
            raise InstanceError(f"c must have length {n}", "c")
        if splc:
            if self.lengths is None:
                raise InstanceError("SPLC instances need segment lengths", "segments")
            object.__setattr__(self, "lengths", _frozen(self.lengths, 3))
            if self.lengths.shape != u.shape:
                raise InstanceError("segment lengths must match utilities in shape", "segments")
        elif self.lengths is not None:
            raise InstanceError("linear instances take no segment lengths", "segments")
        if kind is Kind.TWO_SIDED_SPLC:
            if self.w is None:
                raise InstanceError("two-sided instances need job utilities", "job_utilities")
            object.__setattr__(self, "w", _frozen(self.w, 3))
            if self.w.shape != u.shape:
                raise InstanceError("job utilities must match utilities in shape", "job_utilities")
            d = np.zeros(n) if self.d is None else self.d
            object.__setattr__(self, "d", _frozen(d, 1))
            if self.d.shape != (n,):
                raise InstanceError(f"d must have length {n}", "d")
        else:
            if self.w is not None:
                raise InstanceError("only two-sided instances take job utilities", "job_utilities")
            if self.d is not None and np.any(np.asarray(self.d) != 0):
                raise InstanceError("only two-sided instances take job disagreement values", "d")
            object.__setattr__(self, "d", None)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def is_splc(self) -> bool:
        return self.kind in (Kind.ONE_SIDED_SPLC, Kind.TWO_SIDED_SPLC)

    @property
    def is_bipartite(self) -> bool:
        return self.kind is not Kind.NON_BIPARTITE_LINEAR

    @property
    def two_sided(self) -> bool:
        return self.kind is Kind.TWO_SIDED_SPLC

    @property
    def has_endowments(self) -> bool:
        return bool(np.any(self.c > 0) or (self.d is not None and np.any(self.d > 0)))

    @property
    def allocation_shape(self) -> tuple[int, ...]:
        return self.u.shape

    def agent_utilities(self, x: np.ndarray) -> np.ndarray:
        """u_i(x) for every agent; for the non-bipartite kind ``x`` is the symmetric edge matrix."""
        x = np.asarray(x, dtype=float)
        if self.is_splc:
            return np.einsum("ijk,ijk->i", self.u, x)
        return np.einsum("ij,ij->i", self.u, x)

    def job_utilities(self, x: np.ndarray) -> np.ndarray:
        if not self.two_sided:
            raise ValueError("job utilities exist only for two-sided instances")
        return np.einsum("ijk,ijk->j", self.w, np.asarray(x, dtype=float))

    def equal_share(self) -> np.ndarray:
        """Per-agent utility of the whole good set: sum_j u_ij, or sum_jk u_ijk l_ijk."""
        if self.is_splc:
            return np.einsum("ijk,ijk->i", self.u, self.lengths)
        u = self.u
        if self.kind is Kind.NON_BIPARTITE_LINEAR:
            u = u - np.diag(np.diag(u))
        return u.sum(axis=1)

    def job_equal_share(self) -> np.ndarray:
        return np.einsum("ijk,ijk->j", self.w, self.lengths)


@dataclass(frozen=True)
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ScalingInfo:
    """Per-agent (and per-job) factors applied by :func:`normalize`, plus kappa and delta."""

    scale: np.ndarray
    kappa: float
    delta: float | None = None
    job_scale: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"scale": self.scale.tolist(), "kappa": self.kappa, "delta": self.delta}
        if self.job_scale is not None:
            out["job_scale"] = self.job_scale.tolist()
        return out


def validate(instance: MarketInstance) -> ValidationReport:
    inst = instance
    bad: list[str] = []
    arrays = {"utilities": inst.u, "c": inst.c}
    if inst.is_splc:
        arrays["segment lengths"] = inst.lengths
    if inst.two_sided:
        arrays["job utilities"] = inst.w
        arrays["d"] = inst.d
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            bad.append(f"non-finite values in {name}")
        elif np.any(a < 0):
            idx = tuple(int(v) for v in np.argwhere(a < 0)[0])
            bad.append(f"negative value in {name} at {idx}")

    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        for i in np.flatnonzero(np.diag(inst.u) != 0):
            bad.append(f"self-matching utility u[{i}][{i}] must be 0")

    if inst.is_splc:
        positive = np.any((inst.u > 0) & (inst.lengths > 0), axis=(1, 2))
    else:
        u = inst.u - np.diag(np.diag(inst.u)) if inst.kind is Kind.NON_BIPARTITE_LINEAR else inst.u
        positive = np.any(u > 0, axis=1)
    for i in np.flatnonzero(~positive):
        bad.append(f"degenerate agent {i}: no positive utility")

    if inst.is_splc:
        sums = inst.lengths.sum(axis=2)
        for i, j in np.argwhere(np.abs(sums - 1.0) > 1e-9):
            bad.append(f"segment lengths of ({i},{j}) sum to {sums[i, j]!r}, not 1")
        for name, slopes in (("segments", inst.u), ("job segments", inst.w)):
            if slopes is None:
                continue
            rising = np.any(np.diff(slopes, axis=2) > 0, axis=2)
            for i, j in np.argwhere(rising):
                bad.append(f"{name} not concave at ({i},{j}): slopes increase")
    if inst.two_sided:
        jobs_ok = np.any((inst.w > 0) & (inst.lengths > 0), axis=(0, 2))
        for j in np.flatnonzero(~jobs_ok):
            bad.append(f"degenerate job {j}: no positive utility")
    return ValidationReport(bad)


def normalize(instance: MarketInstance) -> tuple[MarketInstance, ScalingInfo]:
    """Scale each agent (and job) so that its largest utility entry is 1."""
    inst = instance
    axes = (1, 2) if inst.is_splc else 1
    top = inst.u.max(axis=axes)
    if np.any(top <= 0):
        i = int(np.flatnonzero(top <= 0)[0])
        raise DegenerateInstanceError(f"degenerate agent {i}: no positive utility", "utilities")
    scale = 1.0 / top
    shape = (-1, 1, 1) if inst.is_splc else (-1, 1)
    # divide rather than multiply by 1/top so that each maximum is exactly 1
    u = inst.u / top.reshape(shape)
    c = inst.c / top
    w = d = job_scale = None
    if inst.two_sided:
        jtop = inst.w.max(axis=(0, 2))
        if np.any(jtop <= 0):
            j = int(np.flatnonzero(jtop <= 0)[0])
            raise DegenerateInstanceError(f"degenerate job {j}: no positive utility", "job_utilities")
        job_scale = 1.0 / jtop
        w = inst.w / jtop.reshape(1, -1, 1)
        d = inst.d / jtop
    out = MarketInstance(inst.kind, u, c, inst.lengths, w, d)
    shares = out.equal_share()
    if out.two_sided:
        shares = np.concatenate([shares, out.job_equal_share()])
    kappa = max(1.0, 1.0 / float(shares.min()))
    return out, ScalingInfo(scale, kappa, None, job_scale)


def _odd_sets(n: int):
    for size in range(3, n + 1, 2):
        yield from itertools.combinations(range(n), size)


def polytope_constraints(inst: MarketInstance) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray]:
    """(A, b, upper) describing the feasible allocations {A v <= b, 0 <= v <= upper}.

    ``v`` is the flattened allocation; for the non-bipartite kind it is the
    upper-triangle edge vector in ``np.triu_indices(n, 1)`` order.
    """
    n = inst.n
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        iu, ju = np.triu_indices(n, 1)
        m = len(iu)
        rows, cols = [], []
        for e in range(m):
            rows += [iu[e], ju[e]]
            cols += [e, e]
        blocks = [sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, m))]
        bounds = [np.ones(n)]
        odd = list(_odd_sets(n)) if n <= 12 else []
        if n > 12:
            raise ValueError("odd-set constraints are enumerated only for n <= 12")
        if odd:
            r2, c2 = [], []
            for s, members in enumerate(odd):
                inside = np.isin(iu, members) & np.isin(ju, members)
                for e in np.flatnonzero(inside):
                    r2.append(s)
                    c2.append(e)
            blocks.append(sparse.csr_matrix((np.ones(len(r2)), (r2, c2)), shape=(len(odd), m)))
            bounds.append(np.array([(len(s) - 1) // 2 for s in odd], dtype=float))
        return sparse.vstack(blocks).tocsr(), np.concatenate(bounds), np.ones(m)
    L = inst.u.shape[2] if inst.is_splc else 1
    m = n * n * L
    idx = np.arange(m).reshape(n, n, L)
    ii, jj, _ = np.unravel_index(idx.ravel(), (n, n, L))
    row_block = sparse.csr_matrix((np.ones(m), (ii, idx.ravel())), shape=(n, m))
    col_block = sparse.csr_matrix((np.ones(m), (jj, idx.ravel())), shape=(n, m))
    upper = inst.lengths.ravel().copy() if inst.is_splc else np.ones(m)
    return sparse.vstack([row_block, col_block]).tocsr(), np.ones(2 * n), upper


def _utility_rows(inst: MarketInstance) -> tuple[np.ndarray, np.ndarray]:
    """Dense matrix U with U v = (agent utilities, job utilities) and the matching thresholds."""
    n = inst.n
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        iu, ju = np.triu_indices(n, 1)
        U = np.zeros((n, len(iu)))
        U[iu, np.arange(len(iu))] = inst.u[iu, ju]
        U[ju, np.arange(len(iu))] = inst.u[ju, iu]
        return U, inst.c.copy()
    if inst.is_splc:
        L = inst.u.shape[2]
        U = np.zeros((n, n * n * L))
        for i in range(n):
            U[i, i * n * L:(i + 1) * n * L] = inst.u[i].ravel()
        thresholds = inst.c.copy()
        if inst.two_sided:
            W = np.zeros((n, n * n * L))
            for j in range(n):
                mask = np.zeros((n, n, L))
                mask[:, j, :] = 1
                W[j] = (inst.w * mask).ravel()
            U = np.vstack([U, W])
            thresholds = np.concatenate([thresholds, inst.d])
        return U, thresholds
    U = np.zeros((n, n * n))
    for i in range(n):
        U[i, i * n:(i + 1) * n] = inst.u[i]
    return U, inst.c.copy()


def unflatten(inst: MarketInstance, v: np.ndarray) -> np.ndarray:
    """Inverse of the flattening used by :func:`polytope_constraints`."""
    if inst.kind is Kind.NON_BIPARTITE_LINEAR:
        x = np.zeros((inst.n, inst.n))
        iu, ju = np.triu_indices(inst.n, 1)
        x[iu, ju] = v
        x[ju, iu] = v
        return x
    return np.asarray(v, dtype=float).reshape(inst.u.shape)


def feasibility_gap(instance: MarketInstance, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Largest delta (capped at DELTA_MAX) with some feasible x giving u_i(x) >= (1+delta) c_i.

    Returns ``(delta, x_hat)``. Raises InfeasibleInstanceError when delta <= 0.
    """
    inst = instance
    if not inst.has_endowments:
        return DELTA_MAX, np.zeros(inst.allocation_shape)
    A, b, upper = polytope_constraints(inst)
    U, thr = _utility_rows(inst)
    active = thr > 0
    m = A.shape[1]
    # c_i * delta - u_i(v) <= -c_i for agents (and jobs) with positive disagreement
    G = sparse.hstack([-sparse.csr_matrix(U[active]), sparse.csr_matrix(thr[active][:, None])])
    A_ub = sparse.vstack([G, sparse.hstack([A, sparse.csr_matrix((A.shape[0], 1))])]).tocsr()
    b_ub = np.concatenate([-thr[active], b])
    cost = np.zeros(m + 1)
    cost[-1] = -1.0
    bounds = np.column_stack([np.zeros(m + 1), np.append(upper, DELTA_MAX)])
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleInstanceError("no feasible allocation reaches the disagreement point")
    if res.status != 0:
        raise RuntimeError(f"feasibility-gap LP failed: {res.message}")
    delta = float(res.x[-1])
    if delta <= tol:
        raise InfeasibleInstanceError(
            f"feasibility gap {delta:.3g} <= 0: no allocation strictly dominates the disagreement point"
        )
    x_hat = unflatten(inst, np.clip(res.x[:-1], 0.0, upper))
    return delta, x_hat


# generators ---------------------------------------------------------------


def _random_rows(rng: np.random.Generator, n: int, sparsity: float, diag_zero: bool) -> np.ndarray:
    u = rng.uniform(0.0, 1.0, size=(n, n))
    if sparsity > 0:
        u[rng.uniform(size=(n, n)) < sparsity] = 0.0
    if diag_zero:
        np.fill_diagonal(u, 0.0)
    for i in range(n):
        if not np.any(u[i] > 0):
            choices = [j for j in range(n) if not (diag_zero and j == i)]
            u[i, rng.choice(choices)] = rng.uniform(0.5, 1.0)
    return u / u.max(axis=1, keepdims=True)


def _random_segments(rng: np.random.Generator, n: int, segments: int) -> tuple[np.ndarray, np.ndarray]:
    cuts = np.sort(rng.uniform(size=(n, n, segments - 1)), axis=2)
    edges = np.concatenate([np.zeros((n, n, 1)), cuts, np.ones((n, n, 1))], axis=2)
    lengths = np.diff(edges, axis=2)
    # fold the rounding residue into the last segment so each chain sums to exactly 1
    lengths[..., -1] = 1.0 - lengths[..., :-1].sum(axis=2)
    decay = np.sort(rng.uniform(size=(n, n, segments)), axis=2)[..., ::-1]
    return decay, lengths


def _segment_utility(slopes: np.ndarray, lengths: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Value of allocating ``totals[i, j]`` units along the (i, j) segment chain, filling in order."""
    before = np.cumsum(lengths, axis=2) - lengths
    fill = np.clip(totals[..., None] - before, 0.0, lengths)
    return (slopes * fill).sum(axis=2)


def gen_random(
    n: int,
    kind: Kind | str = Kind.ONE_SIDED_LINEAR,
    seed: int = 0,
    sparsity: float = 0.0,
    *,
    segments: int = 3,
    endowment_delta: float | None = None,
) -> MarketInstance:
    """Random instance with i.i.d. uniform utilities, each agent's maximum scaled to 1.

    With ``endowment_delta`` set, every agent gets c_i = u_i(e)/(1 + endowment_delta)
    for a random permutation endowment e, so the feasibility gap is at least that value.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    kind = Kind(kind)
    rng = np.random.default_rng(seed)
    nb = kind is Kind.NON_BIPARTITE_LINEAR
    base = _random_rows(rng, n, sparsity, nb)
    lengths = w = d = None
    if kind in (Kind.ONE_SIDED_SPLC, Kind.TWO_SIDED_SPLC):
        decay, lengths = _random_segments(rng, n, segments)
        u = base[..., None] * decay
        u = u / u.max(axis=(1, 2), keepdims=True)
        if kind is Kind.TWO_SIDED_SPLC:
            jbase = _random_rows(rng, n, sparsity, False)
            jdecay = np.sort(rng.uniform(size=(n, n, segments)), axis=2)[..., ::-1]
            w = jbase.T[..., None] * jdecay
            w = w / w.max(axis=(0, 2), keepdims=True)
            d = np.zeros(n)
    else:
        u = base
    c = np.zeros(n)
    if endowment_delta is not None:
        perm = rng.permutation(n)
        e = np.zeros((n, n))
        if nb:
            # pair agents along the permutation; an odd agent out keeps nothing
            for a, b in zip(perm[0::2], perm[1::2]):
                e[a, b] = e[b, a] = 1.0
        else:
            e[np.arange(n), perm] = 1.0
        if lengths is not None:
            c = _segment_utility(u, lengths, e).sum(axis=1) / (1 + endowment_delta)
            if w is not None:
                d = _segment_utility(w, lengths, e).sum(axis=0) / (1 + endowment_delta)
        else:
            c = (u * e).sum(axis=1) / (1 + endowment_delta)
    return MarketInstance(kind, u, c, lengths, w, d)


def gen_common_value(n: int, seed: int = 0, noise: float = 0.1) -> MarketInstance:
    """Linear one-sided instance where agents share a common good ranking up to noise.

    Such instances have interior optima, unlike i.i.d. draws whose optima are
    usually a single matching, so they exercise the sublinear regime of the solvers.
    """
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.2, 1.0, size=n)
    u = values[None, :] * (1.0 + noise * rng.standard_normal((n, n)))
    u = np.clip(u, 1e-3, None)
    return MarketInstance(Kind.ONE_SIDED_LINEAR, u / u.max(axis=1, keepdims=True))


def gen_tightness(ell: int) -> MarketInstance:
    """Non-bipartite family on 2*ell+1 agents where the last agent is squeezed to 1/(ell+1)."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    n = 2 * ell + 1
    z = n - 1
    u = np.zeros((n, n))
    u[:ell, z] = 1.0
    mid = np.arange(ell, 2 * ell)
    u[np.ix_(mid, np.arange(n))] = 1.0
    u[mid, mid] = 0.0
    u[z, mid] = 1.0
    return MarketInstance(Kind.NON_BIPARTITE_LINEAR, u)


# JSON ---------------------------------------------------------------------


def instance_to_dict(instance: MarketInstance) -> dict:
    inst = instance
    out: dict[str, Any] = {"kind": inst.kind.value, "n": inst.n}
    if inst.is_splc:
        out["segments"] = [
            {"i": i, "j": j, "u": inst.u[i, j].tolist(), "l": inst.lengths[i, j].tolist()}
            for i in range(inst.n)
            for j in range(inst.n)
        ]
        if inst.two_sided:
            out["job_utilities"] = inst.w.tolist()
    else:
        out["utilities"] = inst.u.tolist()
    out["c"] = inst.c.tolist()
    if inst.two_sided:
        out["d"] = inst.d.tolist()
    return out


def _number_array(data: Any, name: str) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"field '{name}' must hold numbers: {exc}", name) from None
    return arr


def instance_from_dict(data: dict) -> MarketInstance:
    if not isinstance(data, dict):
        raise InstanceError("instance JSON must be an object", "kind")
    try:
        kind = Kind(data.get("kind"))
    except ValueError:
        raise InstanceError(f"field 'kind' must be one of {[k.value for k in Kind]}", "kind") from None
    if "n" not in data:
        raise InstanceError("field 'n' is missing", "n")
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InstanceError("field 'n' must be a positive integer", "n")

    def vector(name: str) -> np.ndarray:
        if data.get(name) is None:
            return np.zeros(n)
        v = _number_array(data[name], name)
        if v.shape != (n,):
            raise InstanceError(f"field '{name}' must be a list of {n} numbers", name)
        return v

    c = vector("c")
    if kind in (Kind.ONE_SIDED_LINEAR, Kind.NON_BIPARTITE_LINEAR):
        if "utilities" not in data:
            raise InstanceError("field 'utilities' is missing", "utilities")
        u = _number_array(data["utilities"], "utilities")
        if u.shape != (n, n):
            raise InstanceError(f"field 'utilities' must be an {n}x{n} matrix", "utilities")
        return MarketInstance(kind, u, c)

    segs = data.get("segments")
    if not isinstance(segs, list):
        raise InstanceError("field 'segments' must be a list", "segments")
    chains: dict[tuple[int, int], tuple[list, list]] = {}
    for entry in segs:
        if not isinstance(entry, dict) or not {"i", "j", "u", "l"} <= entry.keys():
            raise InstanceError("each entry of 'segments' needs keys i, j, u, l", "segments")
        i, j = entry["i"], entry["j"]
        if not (isinstance(i, int) and isinstance(j, int) and 0 <= i < n and 0 <= j < n):
            raise InstanceError(f"segment indices ({i},{j}) out of range", "segments")
        su = _number_array(entry["u"], "segments").ravel()
        sl = _number_array(entry["l"], "segments").ravel()
        if su.shape != sl.shape or su.size == 0:
            raise InstanceError(f"segment ({i},{j}) needs equally long, non-empty u and l", "segments")
        chains[(i, j)] = (su, sl)
    jobs = None
    if kind is Kind.TWO_SIDED_SPLC:
        if "job_utilities" not in data:
            raise InstanceError("field 'job_utilities' is missing", "job_utilities")
        jobs = data["job_utilities"]
        if not (isinstance(jobs, list) and len(jobs) == n and all(isinstance(r, list) and len(r) == n for r in jobs)):
            raise InstanceError(f"field 'job_utilities' must be {n}x{n} lists of per-segment values", "job_utilities")
    L = max([len(s[0]) for s in chains.values()] + [1])
    u = np.zeros((n, n, L))
    lengths = np.zeros((n, n, L))
    lengths[:, :, 0] = 1.0
    w = np.zeros((n, n, L)) if jobs is not None else None
    for (i, j), (su, sl) in chains.items():
        lengths[i, j, :] = 0.0
        u[i, j, : len(su)] = su
        lengths[i, j, : len(sl)] = sl
    if jobs is not None:
        for i in range(n):
            for j in range(n):
                wv = _number_array(jobs[i][j], "job_utilities").ravel()
                k = len(chains.get((i, j), ([0],))[0])
                if wv.size != k:
                    raise InstanceError(f"job_utilities[{i}][{j}] must have {k} entries", "job_utilities")
                w[i, j, :k] = wv
    d = vector("d") if jobs is not None else None
    return MarketInstance(kind, u, c, lengths, w, d)


def load_instance(path: str | Path) -> MarketInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}", None) from None
    return instance_from_dict(data)


def save_instance(instance: MarketInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))
