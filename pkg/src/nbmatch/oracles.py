"""Linear optimization oracles over matching and capacitated-assignment polytopes."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

_EPS = 1e-12


@dataclass(frozen=True)
class VertexSolution:
    x: np.ndarray
    value: float


def max_weight_bipartite_matching(w: np.ndarray) -> VertexSolution:
    """Maximum-weight (not necessarily perfect) matching of an n x n nonnegative weight matrix."""
    w = np.asarray(w, dtype=float)
    x = np.zeros_like(w)
    if w.size == 0:
        return VertexSolution(x, 0.0)
    rows, cols = linear_sum_assignment(w, maximize=True)
    keep = w[rows, cols] > 0
    x[rows[keep], cols[keep]] = 1.0
    return VertexSolution(x, float(w[rows[keep], cols[keep]].sum()))


def max_weight_general_matching(w: np.ndarray) -> VertexSolution:
    """Maximum-weight matching on the complete graph with edge weights w[i, j], i < j.

    Returns a symmetric 0/1 matrix. The diagonal and lower triangle of ``w`` are ignored.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    iu, ju = np.triu_indices(n, 1)
    pos = w[iu, ju] > 0
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_weighted_edges_from(zip(iu[pos].tolist(), ju[pos].tolist(), w[iu, ju][pos].tolist()))
    x = np.zeros((n, n))
    value = 0.0
    for a, b in sorted(tuple(sorted(e)) for e in nx.max_weight_matching(g)):
        x[a, b] = x[b, a] = 1.0
        value += w[a, b]
    return VertexSolution(x, value)


class _Residual:
    """Residual graph in arc-list form; arc ``e ^ 1`` is the reverse of arc ``e``."""

    def __init__(self, n_nodes: int):
        self.head: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []
        self.out: list[list[int]] = [[] for _ in range(n_nodes)]

    def add(self, a: int, b: int, cap: float, cost: float) -> int:
        e = len(self.head)
        self.head += [b, a]
        self.cap += [cap, 0.0]
        self.cost += [cost, -cost]
        self.out[a].append(e)
        self.out[b].append(e + 1)
        return e


def max_weight_capacitated_assignment(w: np.ndarray, lengths: np.ndarray) -> VertexSolution:
    """Maximize sum w.x subject to x <= lengths and unit agent and good budgets.

    Solved as a min-cost flow by successive shortest augmenting paths (Dijkstra
    with node potentials), augmenting only while the path cost is negative.
    """
    w = np.asarray(w, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    n, _, L = w.shape
    src, sink = 2 * n, 2 * n + 1
    g = _Residual(2 * n + 2)
    for i in range(n):
        g.add(src, i, 1.0, 0.0)
    seg_arcs = []
    for i in range(n):
        for j in range(n):
            for k in range(L):
                if w[i, j, k] > 0 and lengths[i, j, k] > 0:
                    seg_arcs.append((g.add(i, n + j, float(lengths[i, j, k]), -float(w[i, j, k])), i, j, k))
    for j in range(n):
        g.add(n + j, sink, 1.0, 0.0)

    # initial potentials: shortest distances in the acyclic source -> agents -> goods -> sink graph
    pot = [0.0] * (2 * n + 2)
    for j in range(n):
        pot[n + j] = min([g.cost[e] for e, _, jj, _ in seg_arcs if jj == j], default=0.0)
    pot[sink] = min([pot[n + j] for j in range(n)], default=0.0)

    V = 2 * n + 2
    while True:
        dist = [float("inf")] * V
        prev = [-1] * V
        dist[src] = 0.0
        heap = [(0.0, src)]
        while heap:
            dv, v = heapq.heappop(heap)
            if dv > dist[v]:
                continue
            for e in g.out[v]:
                if g.cap[e] <= _EPS:
                    continue
                b = g.head[e]
                nd = dv + max(g.cost[e] + pot[v] - pot[b], 0.0)
                if nd < dist[b] - 1e-15:
                    dist[b] = nd
                    prev[b] = e
                    heapq.heappush(heap, (nd, b))
        if dist[sink] == float("inf"):
            break
        dt = dist[sink]
        for v in range(V):
            pot[v] += min(dist[v], dt)
        path_cost = pot[sink] - pot[src]
        if path_cost >= -_EPS:
            break
        push = float("inf")
        v = sink
        while v != src:
            e = prev[v]
            push = min(push, g.cap[e])
            v = g.head[e ^ 1]
        v = sink
        while v != src:
            e = prev[v]
            g.cap[e] -= push
            g.cap[e ^ 1] += push
            v = g.head[e ^ 1]

    x = np.zeros_like(w)
    for e, i, j, k in seg_arcs:
        x[i, j, k] = g.cap[e ^ 1]
    np.minimum(x, lengths, out=x)
    return VertexSolution(x, float((w * x).sum()))


def shift(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Move each (i, j) chain's total mass onto its leading segments, filling them in order."""
    x = np.asarray(x, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    total = x.sum(axis=-1, keepdims=True)
    before = np.cumsum(lengths, axis=-1) - lengths
    out = np.clip(total - before, 0.0, lengths)
    # put any rounding residue back on the last segment that received mass so totals are kept
    resid = total[..., 0] - out.sum(axis=-1)
    last = np.maximum((out > 0).sum(axis=-1) - 1, 0)
    np.put_along_axis(out, last[..., None], np.take_along_axis(out, last[..., None], -1) + resid[..., None], -1)
    # chains already in leading-segment form are returned untouched
    settled = np.all((x >= 0) & (x <= lengths), axis=-1)
    settled &= np.all((x[..., 1:] == 0) | (x[..., :-1] == lengths[..., :-1]), axis=-1)
    return np.where(settled[..., None], x, out)
