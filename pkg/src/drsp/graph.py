"""Directed networks, layered test topologies, paths, and reachability.

Nodes are 1-based ids to match the usual drawing convention (source
first, sink last).  Arc ids are assigned in construction order and
frozen; every matrix in the toolkit keys on arc id.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class CapExceeded(RuntimeError):
    """More simple paths exist than the enumeration cap allows."""


class NotAcyclic(RuntimeError):
    """An acyclic-only operation was given a graph with a directed cycle."""


class Graph:
    """Immutable directed graph with a distinguished source and sink.

    Every node must lie on some source->sink walk and parallel arcs are
    not allowed; two-way streets are modeled as a pair of mirrored arcs.
    """

    def __init__(self, n_nodes: int, source: int, sink: int,
                 arcs: list[tuple[int, int]]):
        if source == sink:
            raise ValueError("source and sink must differ")
        if not (1 <= source <= n_nodes and 1 <= sink <= n_nodes):
            raise ValueError("source/sink out of range")
        self.n_nodes = n_nodes
        self.source = source
        self.sink = sink
        self.arcs: tuple[tuple[int, int], ...] = tuple(
            (int(t), int(h)) for t, h in arcs)
        self.arc_index: dict[tuple[int, int], int] = {}
        fs: list[list[int]] = [[] for _ in range(n_nodes + 1)]
        rs: list[list[int]] = [[] for _ in range(n_nodes + 1)]
        for a, (t, h) in enumerate(self.arcs):
            if t == h:
                raise ValueError(f"self-loop at node {t}")
            if not (1 <= t <= n_nodes and 1 <= h <= n_nodes):
                raise ValueError(f"arc ({t},{h}) out of range")
            if (t, h) in self.arc_index:
                raise ValueError(f"parallel arc ({t},{h})")
            self.arc_index[(t, h)] = a
            fs[t].append(a)
            rs[h].append(a)
        self._fs = tuple(tuple(v) for v in fs)
        self._rs = tuple(tuple(v) for v in rs)
        self._check_connected()

    def _check_connected(self) -> None:
        fwd = self._bfs(self.source, forward=True)
        bwd = self._bfs(self.sink, forward=False)
        for i in range(1, self.n_nodes + 1):
            if not (fwd[i] and bwd[i]):
                raise ValueError(f"node {i} is not on any source->sink walk")

    def _bfs(self, start: int, forward: bool) -> np.ndarray:
        seen = np.zeros(self.n_nodes + 1, dtype=bool)
        seen[start] = True
        queue = deque([start])
        while queue:
            i = queue.popleft()
            arcs = self._fs[i] if forward else self._rs[i]
            for a in arcs:
                nxt = self.arcs[a][1] if forward else self.arcs[a][0]
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
        return seen

    # -- queries -----------------------------------------------------------

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def fs(self, i: int) -> tuple[int, ...]:
        """Arc ids leaving node i."""
        return self._fs[i]

    def rs(self, i: int) -> tuple[int, ...]:
        """Arc ids entering node i."""
        return self._rs[i]

    def tail(self, a: int) -> int:
        return self.arcs[a][0]

    def head(self, a: int) -> int:
        return self.arcs[a][1]

    def mirror(self, a: int) -> int | None:
        """Arc id of the reversed twin, if present."""
        t, h = self.arcs[a]
        return self.arc_index.get((h, t))

    def is_acyclic(self) -> bool:
        indeg = [len(self._rs[i]) for i in range(self.n_nodes + 1)]
        queue = deque(i for i in range(1, self.n_nodes + 1) if indeg[i] == 0)
        seen = 0
        while queue:
            i = queue.popleft()
            seen += 1
            for a in self._fs[i]:
                h = self.arcs[a][1]
                indeg[h] -= 1
                if indeg[h] == 0:
                    queue.append(h)
        return seen == self.n_nodes

    def __repr__(self) -> str:
        return (f"Graph(n_nodes={self.n_nodes}, n_arcs={self.n_arcs}, "
                f"source={self.source}, sink={self.sink})")


@dataclass(frozen=True)
class PathIncidence:
    """A simple source->sink path as node sequence plus 0/1 arc vector."""

    nodes: tuple[int, ...]
    arc_ids: tuple[int, ...]
    y: np.ndarray

    @staticmethod
    def from_nodes(g: Graph, nodes: list[int]) -> "PathIncidence":
        arc_ids = []
        for t, h in zip(nodes[:-1], nodes[1:]):
            a = g.arc_index.get((t, h))
            if a is None:
                raise ValueError(f"missing arc ({t},{h})")
            arc_ids.append(a)
        y = np.zeros(g.n_arcs)
        y[arc_ids] = 1.0
        return PathIncidence(tuple(nodes), tuple(arc_ids), y)

    def next_arc(self, node: int, g: Graph) -> int | None:
        """Arc the path takes out of the given node, if it visits it."""
        for k, n in enumerate(self.nodes[:-1]):
            if n == node:
                return self.arc_ids[k]
        return None

    def __eq__(self, other) -> bool:
        return isinstance(other, PathIncidence) and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash(self.nodes)


def satisfies_path_polytope(g: Graph, y: np.ndarray, tol: float = 1e-9) -> bool:
    """Flow conservation plus the visit-once cut at every node."""
    for i in range(1, g.n_nodes + 1):
        out_sum = sum(y[a] for a in g.fs(i))
        in_sum = sum(y[a] for a in g.rs(i))
        target = 1.0 if i == g.source else (-1.0 if i == g.sink else 0.0)
        if abs(out_sum - in_sum - target) > tol:
            return False
        if out_sum > 1.0 + tol:
            return False
    return True


def build_layered(h: int, r: int, kind: str = "acyclic") -> Graph:
    """Fully connected layered graph with h intermediate layers of r nodes.

    ``kind="general"`` additionally reverses every arc between
    intermediate layers, so those roads can be traversed both ways;
    arcs touching the source or sink stay one-way.
    """
    if h < 1 or r < 1:
        raise ValueError("need h >= 1 and r >= 1")
    if kind not in ("acyclic", "general"):
        raise ValueError(f"unknown graph kind {kind!r}")
    source = 1
    layers = [[1 + k * r + i for i in range(1, r + 1)] for k in range(h)]
    sink = h * r + 2
    arcs: list[tuple[int, int]] = []
    for j in layers[0]:
        arcs.append((source, j))
    for k in range(h - 1):
        for i in layers[k]:
            for j in layers[k + 1]:
                arcs.append((i, j))
    for i in layers[-1]:
        arcs.append((i, sink))
    if kind == "general":
        for k in range(h - 1):
            for i in layers[k]:
                for j in layers[k + 1]:
                    arcs.append((j, i))
    return Graph(sink, source, sink, arcs)


def build_example1():
    """Eight-node demo network with one budget row and one difference cue.

    Returns (graph, ambiguity set, auxiliary constraint list): two
    branches out of the source, a shared budget on the four middle
    arcs, and a single expected-cost comparison revealed at node 2.
    """
    from .ambiguity import (AmbiguitySet, AuxiliaryConstraint,
                            ExpectationRow, ProbabilityConstraint)

    arcs = [(1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7),
            (4, 8), (5, 8), (6, 8), (7, 8)]
    g = Graph(8, 1, 8, arcs)
    wide = {g.arc_index[a] for a in [(2, 4), (2, 5), (3, 6), (3, 7)]}
    prob = []
    for a in range(g.n_arcs):
        u = 1.0 if a in wide else 0.0
        prob.append(ProbabilityConstraint(a, 0.0, u, 1.0, 1.0))
    budget = ExpectationRow(tuple((a, 1.0) for a in sorted(wide)), 1.0, "le")
    amb = AmbiguitySet(g.n_arcs, prob, (budget,))
    a24 = g.arc_index[(2, 4)]
    a25 = g.arc_index[(2, 5)]
    aux = [AuxiliaryConstraint(node=2, kind="expectation", family="difference",
                               coeffs=((a24, 1.0), (a25, -1.0)), rhs=0.0)]
    return g, amb, aux


def reachability(g: Graph) -> np.ndarray:
    """Boolean relation reach[i, j]: a directed i->j path exists (i==j counts).

    Computed Floyd-Warshall style; row/column 0 is unused padding.
    """
    n = g.n_nodes
    reach = np.zeros((n + 1, n + 1), dtype=bool)
    for i in range(1, n + 1):
        reach[i, i] = True
    for t, h in g.arcs:
        reach[t, h] = True
    for k in range(1, n + 1):
        reach |= np.outer(reach[:, k], reach[k, :])
    return reach


def enumerate_simple_paths(g: Graph, cap: int,
                           strict: bool = True) -> list[PathIncidence]:
    """All simple source->sink paths in lexicographic node order.

    Raises CapExceeded once more than ``cap`` paths exist when strict;
    otherwise returns the first ``cap`` of them.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    paths: list[PathIncidence] = []
    visited = {g.source}
    stack = [g.source]

    def neighbors(i: int) -> list[tuple[int, int]]:
        out = [(g.arcs[a][1], a) for a in g.fs(i)]
        out.sort()
        return out

    def dfs(i: int) -> bool:
        if i == g.sink:
            if len(paths) >= cap:
                if strict:
                    raise CapExceeded(f"more than {cap} simple paths")
                return False
            paths.append(PathIncidence.from_nodes(g, list(stack)))
            return True
        for nxt, _ in neighbors(i):
            if nxt in visited:
                continue
            visited.add(nxt)
            stack.append(nxt)
            more = dfs(nxt)
            stack.pop()
            visited.remove(nxt)
            if not more:
                return False
        return True

    dfs(g.source)
    return paths
