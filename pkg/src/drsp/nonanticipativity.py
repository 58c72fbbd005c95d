"""Rows that keep scenario paths identical until responses can differ.

For a pair of scenarios the user can only tell apart at certain nodes,
the path copies must agree on every arc chosen before such a node is
reached.  Acyclic graphs get forward-star equalities plus absolute-
difference guards; general graphs get visit-order labels with a
linearized before/after indicator per (scenario, node, trigger-node)
triple.

Rows are emitted over symbolic variable keys:

    ("y", j, a)   path incidence of scenario j on arc a
    ("t", j, i)   visit-order label of node i under scenario j
    ("v", j, i, n), ("vb", j, i, n), ("w", j, i, n)   linearization helpers

The model builder maps keys to concrete columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambiguity import ResponseVector
from .graph import Graph, NotAcyclic


@dataclass(frozen=True)
class DiffNodes:
    """Scenario pair plus the nodes where their responses differ."""

    j: int
    l: int
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class LinRow:
    coeffs: tuple[tuple[tuple, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True)
class FreshVar:
    key: tuple
    lo: float
    up: float
    integer: bool = False


def _row(coeffs: dict, sense: str, rhs: float) -> LinRow:
    return LinRow(tuple(coeffs.items()), sense, float(rhs))


def diff_nodes(aux_list, rj: ResponseVector, rl: ResponseVector) -> DiffNodes:
    if len(rj.bits) != len(rl.bits) or len(rj.bits) != len(aux_list):
        raise ValueError("response vectors must match the auxiliary list")
    nodes = sorted({aux.node for aux, bj, bl in zip(aux_list, rj.bits, rl.bits)
                    if bj != bl})
    return DiffNodes(rj.index, rl.index, tuple(nodes))


def acyclic_rows(g: Graph, reach: np.ndarray, nd: DiffNodes) -> list[LinRow]:
    """Pairwise rows for acyclic graphs.

    At a node from which every divergence node is still reachable the
    two scenarios must pick the same outgoing arc.  Where some
    divergence nodes are unreachable, the arc difference is bounded by
    the flow those copies send through the unreachable nodes, emitted
    in both orientations.
    """
    if not g.is_acyclic():
        raise NotAcyclic("acyclic non-anticipativity rows need a DAG")
    j, l = nd.j, nd.l
    marked = set(nd.nodes)
    rows: list[LinRow] = []
    for i in range(1, g.n_nodes + 1):
        if i in marked or not g.fs(i):
            continue
        unreachable = [v for v in nd.nodes if not reach[i, v]]
        if not unreachable:
            for a in g.fs(i):
                rows.append(_row({("y", j, a): 1.0, ("y", l, a): -1.0},
                                 "eq", 0.0))
            continue
        for jj, ll in ((j, l), (l, j)):
            guard: dict = {}
            for v in unreachable:
                for a2 in g.fs(v):
                    guard[("y", jj, a2)] = guard.get(("y", jj, a2), 0.0) - 1.0
            for a in g.fs(i):
                up = {("y", jj, a): 1.0, ("y", ll, a): -1.0}
                up.update(guard)
                rows.append(_row(up, "le", 0.0))
                dn = {("y", jj, a): -1.0, ("y", ll, a): 1.0}
                dn.update(guard)
                rows.append(_row(dn, "le", 0.0))
    return rows


def ordering_label_rows(g: Graph, j: int) -> tuple[list[LinRow], list[FreshVar]]:
    """Visit-order labels for one scenario: zero at the source, strictly
    increasing along chosen arcs, capped at the longest simple path."""
    n = g.n_nodes
    big = float(n)
    rows = [_row({("t", j, g.source): 1.0}, "eq", 0.0)]
    fresh = [FreshVar(("t", j, i), 0.0, float(n - 1)) for i in range(1, n + 1)]
    for a, (t, h) in enumerate(g.arcs):
        rows.append(_row({("t", j, t): 1.0, ("t", j, h): -1.0,
                          ("y", j, a): big}, "le", big - 1.0))
    return rows, fresh


def general_rows(g: Graph, nd: DiffNodes,
                 seen_labels: set[int] | None = None,
                 seen_triples: set[tuple] | None = None
                 ) -> tuple[list[LinRow], list[FreshVar]]:
    """Pairwise rows valid on any graph, using visit-order labels.

    Per (scenario, node, trigger) triple a clamped label difference and
    a before/after indicator are linearized once and shared across all
    pairs that need them; the arc-difference guards are emitted per
    pair in both orientations.
    """
    if seen_labels is None:
        seen_labels = set()
    if seen_triples is None:
        seen_triples = set()
    rows: list[LinRow] = []
    fresh: list[FreshVar] = []
    big = float(g.n_nodes - 1)
    marked = set(nd.nodes)
    for jj, ll in ((nd.j, nd.l), (nd.l, nd.j)):
        if jj not in seen_labels:
            seen_labels.add(jj)
            lr, lf = ordering_label_rows(g, jj)
            rows += lr
            fresh += lf
        for i in range(1, g.n_nodes + 1):
            if i in marked or not g.fs(i):
                continue
            for n in nd.nodes:
                key = (jj, i, n)
                if key in seen_triples:
                    continue
                seen_triples.add(key)
                v = ("v", jj, i, n)
                vb = ("vb", jj, i, n)
                w = ("w", jj, i, n)
                fresh.append(FreshVar(v, 0.0, big))
                fresh.append(FreshVar(vb, 0.0, 1.0, integer=True))
                fresh.append(FreshVar(w, 0.0, 1.0))
                rows.append(_row({v: 1.0}, "ge", 0.0))
                rows.append(_row({v: 1.0, ("t", jj, i): -1.0,
                                  ("t", jj, n): 1.0}, "ge", 0.0))
                rows.append(_row({v: 1.0, vb: -big}, "le", 0.0))
                rows.append(_row({v: 1.0, ("t", jj, i): -1.0,
                                  ("t", jj, n): 1.0, vb: big}, "le", big))
                wrow = {w: 1.0, v: -1.0}
                for a2 in g.fs(n):
                    wrow[("y", jj, a2)] = wrow.get(("y", jj, a2), 0.0) + 1.0
                for a2 in g.fs(i):
                    wrow[("y", jj, a2)] = wrow.get(("y", jj, a2), 0.0) + 1.0
                rows.append(_row(wrow, "le", 2.0))
                cap = {w: 1.0}
                for a2 in g.fs(n):
                    cap[("y", jj, a2)] = cap.get(("y", jj, a2), 0.0) - 1.0
                rows.append(_row(cap, "le", 0.0))
            guard = {("w", jj, i, n): -1.0 for n in nd.nodes}
            for a in g.fs(i):
                up = {("y", jj, a): 1.0, ("y", ll, a): -1.0}
                up.update(guard)
                rows.append(_row(up, "le", 0.0))
                dn = {("y", jj, a): -1.0, ("y", ll, a): 1.0}
                dn.update(guard)
                rows.append(_row(dn, "le", 0.0))
    return rows, fresh
