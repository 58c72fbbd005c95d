"""Model builders: static worst-case, floor LP, multi-stage, posterior.

All four work on expected costs.  Inner worst-case maximizations over a
cost polytope are dualized, so each scenario contributes a block of
nonnegative multipliers tied to its polytope rows and the path choice;
the epigraph variable dominates every block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .ambiguity import (AmbiguitySet, InfeasibleAmbiguity, Polyhedron,
                        ResponseVector, is_feasible)
from .graph import Graph, PathIncidence, reachability
from .model import LinearProgram, MixedIntegerProgram
from .nonanticipativity import acyclic_rows, diff_nodes, general_rows
from .solver import MipOutcome, solve_lp

log = logging.getLogger(__name__)


class TooManyScenarios(RuntimeError):
    """The auxiliary list exceeds the configured scenario cap."""


class PosteriorInfeasible(RuntimeError):
    """The identified cost polytope is empty; the posterior loss is undefined."""


def _path_rows(model: LinearProgram, g: Graph, yname) -> None:
    for i in range(1, g.n_nodes + 1):
        coeffs: dict[int, float] = {}
        for a in g.fs(i):
            coeffs[model.var_index(yname(a))] = 1.0
        for a in g.rs(i):
            coeffs[model.var_index(yname(a))] = coeffs.get(
                model.var_index(yname(a)), 0.0) - 1.0
        rhs = 1.0 if i == g.source else (-1.0 if i == g.sink else 0.0)
        if coeffs:
            model.add_row(coeffs, "eq", rhs, name=f"flow[{i}]")
        out = {model.var_index(yname(a)): 1.0 for a in g.fs(i)}
        if out:
            model.add_row(out, "le", 1.0, name=f"visit[{i}]")


def _dual_block(model: LinearProgram, g: Graph, poly: Polyhedron,
                yname, lamname) -> list[int]:
    """Multipliers plus arc-balance rows tying them to the path copy.

    Returns the multiplier column indices in canonical row order.
    """
    rows = poly.canonical_rows()
    lam_idx = [model.add_var(lamname(r), 0.0) for r in range(len(rows))]
    per_arc: list[dict[int, float]] = [dict() for _ in range(g.n_arcs)]
    for r, (coeffs, _) in enumerate(rows):
        for a, v in coeffs.items():
            per_arc[a][lam_idx[r]] = v
    for a in range(g.n_arcs):
        coeffs = dict(per_arc[a])
        coeffs[model.var_index(yname(a))] = -1.0
        model.add_row(coeffs, "eq", 0.0, name=f"balance[{yname(a)}]")
    return lam_idx


def build_static_mip(g: Graph, s0: Polyhedron) -> MixedIntegerProgram:
    """One-shot worst-case path choice as a MIP.

    Minimizes the dual value of the inner cost maximization subject to
    the path polytope; box bounds are materialized as explicit rows so
    the multipliers cover them.
    """
    mip = MixedIntegerProgram("static", "min")
    for a in range(g.n_arcs):
        mip.add_binary(f"y[{a}]")
    rows = s0.canonical_rows()
    lam_idx = _dual_block(mip, g, s0, lambda a: f"y[{a}]",
                          lambda r: f"lam[{r}]")
    for r, (_, rhs) in enumerate(rows):
        mip.set_objective(lam_idx[r], rhs)
    _path_rows(mip, g, lambda a: f"y[{a}]")
    return mip


def build_maxmin_lp(g: Graph, s0: Polyhedron) -> LinearProgram:
    """Floor value: the cost player commits first, then a shortest path.

    Potentials certify the shortest-path value; the cost vector ranges
    over the base polytope.
    """
    lp = LinearProgram("maxmin", "max")
    for a in range(g.n_arcs):
        lp.add_var(f"c[{a}]", float(s0.lower[a]), float(s0.upper[a]))
    for i in range(1, g.n_nodes + 1):
        obj = 1.0 if i == g.source else (-1.0 if i == g.sink else 0.0)
        lp.add_var(f"mu[{i}]", -np.inf, np.inf, obj=obj)
    for a, (t, h) in enumerate(g.arcs):
        lp.add_row({lp.var_index(f"c[{a}]"): 1.0,
                    lp.var_index(f"mu[{t}]"): -1.0,
                    lp.var_index(f"mu[{h}]"): 1.0}, "ge", 0.0,
                   name=f"potential[{a}]")
    for k, (coeffs, rhs) in enumerate(s0.rows):
        lp.add_row({lp.var_index(f"c[{a}]"): v for a, v in coeffs}, "le", rhs,
                   name=f"budget[{k}]")
    return lp


def _key_name(key: tuple) -> str:
    kind = key[0]
    return f"{kind}[" + ",".join(str(k) for k in key[1:]) + "]"


def build_multistage_mip(g: Graph, partitions: list[Polyhedron],
                         aux_list, mode: str = "auto",
                         scenario_cap: int = 12) -> MixedIntegerProgram:
    """Single MIP for the adaptive game across all response scenarios.

    One path copy and one dual block per scenario, an epigraph variable
    dominating every block, and non-anticipativity rows per scenario
    pair.  Empty scenario polytopes are kept: their dual blocks are
    non-binding.
    """
    k = len(aux_list)
    if k > scenario_cap:
        raise TooManyScenarios(f"{k} auxiliary constraints exceed cap {scenario_cap}")
    n_scen = 1 << k
    if len(partitions) != n_scen:
        raise ValueError(f"expected {n_scen} partitions, got {len(partitions)}")
    if mode == "auto":
        mode = "acyclic" if g.is_acyclic() else "general"
    if mode not in ("acyclic", "general"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "acyclic" and not g.is_acyclic():
        raise ValueError("acyclic mode requires an acyclic graph")

    any_feasible = False
    for j, poly in enumerate(partitions, start=1):
        if is_feasible(poly):
            any_feasible = True
        else:
            log.info("scenario %d has an empty cost polytope; "
                     "its dual block will be non-binding", j)
    if not any_feasible:
        raise InfeasibleAmbiguity("every scenario polytope is empty")

    mip = MixedIntegerProgram(f"multistage_{mode}", "min")
    z = mip.add_var("z", -np.inf, np.inf, obj=1.0)
    for j in range(1, n_scen + 1):
        for a in range(g.n_arcs):
            mip.add_binary(f"y[{j},{a}]")
    for j, poly in enumerate(partitions, start=1):
        rows = poly.canonical_rows()
        lam_idx = _dual_block(mip, g, poly, lambda a, j=j: f"y[{j},{a}]",
                              lambda r, j=j: f"lam[{j},{r}]")
        cover = {z: 1.0}
        for r, (_, rhs) in enumerate(rows):
            if rhs:
                cover[lam_idx[r]] = -rhs
        mip.add_row(cover, "ge", 0.0, name=f"epigraph[{j}]")
        _path_rows(mip, g, lambda a, j=j: f"y[{j},{a}]")

    vectors = ResponseVector.all_vectors(k)
    reach = reachability(g) if mode == "acyclic" else None
    seen_labels: set[int] = set()
    seen_triples: set[tuple] = set()

    def materialize(rows, fresh=()):
        for fv in fresh:
            mip.add_var(_key_name(fv.key), fv.lo, fv.up, integer=fv.integer)
        for row in rows:
            coeffs = {}
            for key, val in row.coeffs:
                coeffs[mip.var_index(_key_name(key))] = val
            mip.add_row(coeffs, row.sense, row.rhs)

    for j in range(n_scen):
        for l in range(j + 1, n_scen):
            nd = diff_nodes(aux_list, vectors[j], vectors[l])
            if mode == "acyclic":
                materialize(acyclic_rows(g, reach, nd))
            else:
                rows, fresh = general_rows(g, nd, seen_labels, seen_triples)
                materialize(rows, fresh)
    return mip


def build_posterior_lp(y: PathIncidence, s: Polyhedron) -> LinearProgram:
    """Worst expected cost of a fixed path over one cost polytope."""
    lp = LinearProgram("posterior", "max")
    for a in range(s.n_arcs):
        lo = min(s.lower[a], s.upper[a])
        up = max(s.lower[a], s.upper[a])
        lp.add_var(f"c[{a}]", float(lo), float(up), obj=float(y.y[a]))
    if s.box_crossed:
        # encode the crossed box as contradictory rows instead of bounds
        for a in range(s.n_arcs):
            if s.lower[a] > s.upper[a]:
                lp.add_row({lp.var_index(f"c[{a}]"): 1.0}, "le", float(s.upper[a]))
                lp.add_row({lp.var_index(f"c[{a}]"): -1.0}, "le", float(-s.lower[a]))
    for coeffs, rhs in s.rows:
        lp.add_row({lp.var_index(f"c[{a}]"): v for a, v in coeffs}, "le", rhs)
    return lp


def posterior_value(y: PathIncidence, s: Polyhedron) -> float:
    out = solve_lp(build_posterior_lp(y, s))
    if out.status != "optimal":
        raise PosteriorInfeasible("identified cost polytope is empty")
    return float(out.objective)


@dataclass
class MultiStagePolicy:
    """Solved adaptive plan: one path, multipliers, and labels per scenario."""

    objective: float
    paths: tuple[PathIncidence, ...]
    duals: tuple[np.ndarray, ...]
    labels: tuple[np.ndarray | None, ...]
    binding: int  # 1-based scenario whose dual value matches the objective

    @property
    def n_scenarios(self) -> int:
        return len(self.paths)


def _walk_path(g: Graph, yvals: np.ndarray) -> PathIncidence:
    nodes = [g.source]
    chosen = 0
    while nodes[-1] != g.sink:
        outs = [a for a in g.fs(nodes[-1]) if yvals[a] > 0.5]
        if len(outs) != 1:
            raise ValueError(f"path copy branches at node {nodes[-1]}")
        nodes.append(g.head(outs[0]))
        chosen += 1
        if chosen > g.n_nodes:
            raise ValueError("path copy does not reach the sink")
    return PathIncidence.from_nodes(g, nodes)


def extract_policy(mip: MixedIntegerProgram, out: MipOutcome, g: Graph,
                   partitions: list[Polyhedron]) -> MultiStagePolicy:
    """Read the per-scenario paths, multipliers, and labels off a solution."""
    if out.status not in ("optimal", "time_limit") or out.x is None:
        raise ValueError(f"cannot extract a policy from status {out.status}")
    x = out.x
    n_scen = len(partitions)
    paths = []
    duals = []
    labels = []
    values = []
    for j in range(1, n_scen + 1):
        yvals = np.array([x[mip.var_index(f"y[{j},{a}]")]
                          for a in range(g.n_arcs)])
        paths.append(_walk_path(g, yvals))
        rows = partitions[j - 1].canonical_rows()
        lam = np.array([x[mip.var_index(f"lam[{j},{r}]")]
                        for r in range(len(rows))])
        duals.append(lam)
        values.append(float(sum(lam[r] * rhs for r, (_, rhs) in enumerate(rows))))
        tkey = f"t[{j},{g.source}]"
        if tkey in mip.registry:
            labels.append(np.array(
                [x[mip.var_index(f"t[{j},{i}]")]
                 for i in range(1, g.n_nodes + 1)]))
        else:
            labels.append(None)
    binding = int(np.argmax(values)) + 1
    return MultiStagePolicy(float(out.objective), tuple(paths), tuple(duals),
                            tuple(labels), binding)
