"""Minimum / maximum mean cycles of a node-weighted digraph.

Every edge ``(u, v)`` carries the integer weight of its source node, so a
cycle's mean is the average output along it. Means are kept as exact
:class:`~fractions.Fraction` values.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Optional

import networkx as nx
import numpy as np

__all__ = [
    "CycleResult",
    "Polarity",
    "canonical_rotation",
    "enumerate_min_cycles",
    "karp_value",
    "max_mean_cycle",
    "min_mean_cycle",
]


class Polarity(enum.Enum):
    MIN = "min"
    MAX = "max"


class EmptyGraphError(ValueError):
    pass


@dataclass(frozen=True)
class CycleResult:
    cycle: tuple
    symbols: tuple
    mean: Fraction
    h: float
    polarity: Polarity

    @property
    def value(self) -> float:
        """Mean scaled by the checking period."""
        return float(Fraction(repr(self.h)) * self.mean)

    def __len__(self):
        return len(self.cycle)


def canonical_rotation(seq) -> tuple:
    seq = tuple(seq)
    if not seq:
        return seq
    return min(seq[i:] + seq[:i] for i in range(len(seq)))


def _graph(model, output: Optional[Callable] = None):
    """(nodes, successor map, integer weight function, h) from a model-like object."""
    if isinstance(model, nx.DiGraph):
        nodes = sorted(model.nodes)
        succ = {u: sorted(model.successors(u)) for u in nodes}
        w = output or (lambda u: model.nodes[u]["weight"])
        h = model.graph.get("h", 1.0)
    else:
        nodes = list(model.states)
        succ = model.succ
        w = output or model.output
        h = model.h
    if not nodes:
        raise EmptyGraphError("empty model")
    return nodes, succ, w, h


def _sccs(nodes, succ) -> list:
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from((u, v) for u in nodes for v in succ[u])
    out = []
    for comp in nx.strongly_connected_components(g):
        comp = sorted(comp)
        if len(comp) == 1 and comp[0] not in succ[comp[0]]:
            continue
        out.append(comp)
    return out


def _karp_scc(comp, succ, weight) -> tuple[Fraction, tuple]:
    """Karp's characterization on one strongly connected component.

    Returns the minimum mean and one cycle attaining it.
    """
    n = len(comp)
    idx = {u: i for i, u in enumerate(comp)}
    src, dst = [], []
    for u in comp:
        for v in succ[u]:
            if v in idx:
                src.append(idx[u])
                dst.append(idx[v])
    src = np.array(src)
    dst = np.array(dst)
    wts = np.array([weight(comp[i]) for i in src], dtype=np.int64)
    inf = np.iinfo(np.int64).max // 4
    d = np.full((n + 1, n), inf, dtype=np.int64)
    parent = np.full((n + 1, n), -1, dtype=np.int64)
    d[0, 0] = 0
    order = np.lexsort((src, dst))
    src, dst, wts = src[order], dst[order], wts[order]
    for k in range(1, n + 1):
        prev = d[k - 1, src]
        cand = np.where(prev < inf, prev + wts, inf)
        # per-destination argmin over incoming edges
        row = np.full(n, inf, dtype=np.int64)
        np.minimum.at(row, dst, cand)
        d[k] = row
        hit = (cand == row[dst]) & (cand < inf)
        # first edge (in sorted order) attaining the min
        par = np.full(n, -1, dtype=np.int64)
        rev = np.flatnonzero(hit)[::-1]
        par[dst[rev]] = src[rev]
        parent[k] = par

    best, best_v = None, -1
    for v in range(n):
        if d[n, v] >= inf:
            continue
        worst = None
        for k in range(n):
            if d[k, v] >= inf:
                continue
            r = Fraction(int(d[n, v] - d[k, v]), n - k)
            if worst is None or r > worst:
                worst = r
        if worst is not None and (best is None or worst < best):
            best, best_v = worst, v

    # walk back n steps from best_v; the walk repeats a vertex
    walk = [best_v]
    for k in range(n, 0, -1):
        walk.append(int(parent[k, walk[-1]]))
    walk.reverse()
    cycle = _cycle_on_walk(walk, comp, weight, best)
    if cycle is None:
        cycle = _tight_cycle(comp, succ, weight, best)
    return best, cycle


def _cycle_on_walk(walk, comp, weight, target: Fraction) -> Optional[tuple]:
    """First simple cycle on ``walk`` whose mean equals ``target``."""
    for i in range(len(walk)):
        seen = {}
        for j in range(i, len(walk)):
            v = walk[j]
            if v in seen:
                cyc = [comp[x] for x in walk[seen[v]:j]]
                if Fraction(sum(weight(u) for u in cyc), len(cyc)) == target:
                    return tuple(cyc)
                break
            seen[v] = j
    return None


def _tight_subgraph(nodes, succ, weight, value: Fraction) -> nx.DiGraph:
    """Edges with zero reduced cost once every weight is shifted by ``-value``.

    Shifted weights are scaled to integers; all cycles then have nonnegative
    weight, and exactly the cycles of mean ``value`` lie in the returned graph.
    """
    num, den = value.numerator, value.denominator
    members = set(nodes)
    g = nx.DiGraph()
    root = object()
    g.add_node(root)
    for u in nodes:
        g.add_edge(root, u, weight=0)
        for v in succ[u]:
            if v in members:
                g.add_edge(u, v, weight=weight(u) * den - num)
    pot = nx.single_source_bellman_ford_path_length(g, root)
    tight = nx.DiGraph()
    tight.add_nodes_from(nodes)
    for u in nodes:
        for v in succ[u]:
            if v in members and weight(u) * den - num + pot[u] - pot[v] == 0:
                tight.add_edge(u, v)
    return tight


def _tight_cycle(comp, succ, weight, value) -> tuple:
    tight = _tight_subgraph(comp, succ, weight, value)
    cyc = nx.find_cycle(tight)
    return tuple(u for u, _ in cyc)


def karp_value(model, polarity: Polarity = Polarity.MIN, output: Optional[Callable] = None) -> tuple:
    """(extreme mean, cycle) over all strongly connected components."""
    nodes, succ, w, _ = _graph(model, output)
    weight = w if polarity is Polarity.MIN else (lambda u: -w(u))
    best = None
    for comp in _sccs(nodes, succ):
        val, cyc = _karp_scc(comp, succ, weight)
        if best is None or val < best[0]:
            best = (val, cyc)
    if best is None:
        raise EmptyGraphError("model has no cycle")
    val, cyc = best
    return (val if polarity is Polarity.MIN else -val), cyc


def _result(model, cyc, polarity, output=None) -> CycleResult:
    _, _, w, h = _graph(model, output)
    cyc = canonical_rotation(cyc)
    symbols = tuple(w(u) for u in cyc)
    mean = Fraction(sum(symbols), len(symbols))
    return CycleResult(cycle=cyc, symbols=symbols, mean=mean, h=h, polarity=polarity)


def min_mean_cycle(model, output: Optional[Callable] = None) -> CycleResult:
    val, cyc = karp_value(model, Polarity.MIN, output)
    res = _result(model, cyc, Polarity.MIN, output)
    assert res.mean == val
    return res


def max_mean_cycle(model, output: Optional[Callable] = None) -> CycleResult:
    val, cyc = karp_value(model, Polarity.MAX, output)
    res = _result(model, cyc, Polarity.MAX, output)
    assert res.mean == val
    return res


def enumerate_min_cycles(model, limit: int = 16, value: Optional[Fraction] = None,
                         output: Optional[Callable] = None) -> list:
    """Up to ``limit`` distinct simple cycles attaining the minimum mean.

    Shortest cycles come first among those found.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    nodes, succ, w, _ = _graph(model, output)
    if value is None:
        value, _ = karp_value(model, Polarity.MIN, output)
    tight = _tight_subgraph(nodes, succ, w, value)
    found = {}
    for cyc in itertools.islice(nx.simple_cycles(tight), 50 * limit):
        key = canonical_rotation(cyc)
        found.setdefault(key, None)
    cycles = sorted(found, key=lambda c: (len(c), c))[:limit]
    return [_result(model, c, Polarity.MIN, output) for c in cycles]
