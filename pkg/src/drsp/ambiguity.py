"""Distribution families over arc costs and their expected-cost polytopes.

A family is described by per-arc interval probability constraints plus
linear expectation rows.  For optimization everything is projected onto
expected costs: per-arc bounds come from small moment LPs, expectation
rows carry over verbatim, and each vector of yes/no responses to the
auxiliary constraints induces a sub-polytope of the base polytope.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LinearProgram
from .solver import solve_lp

_PERTURB = 1e-9


class InfeasibleAmbiguity(RuntimeError):
    """No distribution satisfies the given probability constraints."""


@dataclass(frozen=True)
class ProbabilityConstraint:
    """Mass of one arc's cost inside [lo, hi] must lie in [q_lo, q_hi]."""

    arc: int
    lo: float
    hi: float
    q_lo: float
    q_hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty cost interval")
        if not (0.0 <= self.q_lo <= self.q_hi <= 1.0):
            raise ValueError("probability bounds must satisfy 0 <= lo <= hi <= 1")


@dataclass(frozen=True)
class ExpectationRow:
    """Sparse row of the linear expectation system: coeffs . E[c] sense rhs."""

    coeffs: tuple[tuple[int, float], ...]
    rhs: float
    sense: str = "le"  # "le" | "eq"

    def __post_init__(self):
        if self.sense not in ("le", "eq"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if not self.coeffs:
            raise ValueError("expectation row needs at least one coefficient")

    def as_dict(self) -> dict[int, float]:
        return dict(self.coeffs)


class AmbiguitySet:
    """Per-arc probability constraint lists plus shared expectation rows.

    The first constraint of every arc is its support: q_lo == q_hi == 1.
    """

    def __init__(self, n_arcs: int, prob_constraints, expectation_rows=()):
        per_arc: list[list[ProbabilityConstraint]] = [[] for _ in range(n_arcs)]
        for pc in prob_constraints:
            if not (0 <= pc.arc < n_arcs):
                raise ValueError(f"constraint references unknown arc {pc.arc}")
            per_arc[pc.arc].append(pc)
        for a, lst in enumerate(per_arc):
            if not lst:
                raise ValueError(f"arc {a} has no support constraint")
            sup = lst[0]
            if not (sup.q_lo == sup.q_hi == 1.0):
                raise ValueError(f"first constraint of arc {a} must be the support")
            for pc in lst[1:]:
                if pc.lo < sup.lo - 1e-12 or pc.hi > sup.hi + 1e-12:
                    raise ValueError(
                        f"arc {a}: subinterval [{pc.lo},{pc.hi}] leaves the support")
        self.n_arcs = n_arcs
        self._per_arc = tuple(tuple(lst) for lst in per_arc)
        rows = tuple(expectation_rows)
        for row in rows:
            for a, _ in row.coeffs:
                if not (0 <= a < n_arcs):
                    raise ValueError(f"expectation row references unknown arc {a}")
        self.expectation_rows = rows

    def arc_constraints(self, a: int) -> tuple[ProbabilityConstraint, ...]:
        return self._per_arc[a]

    def support(self, a: int) -> tuple[float, float]:
        sup = self._per_arc[a][0]
        return sup.lo, sup.hi


@dataclass(frozen=True)
class AuxiliaryConstraint:
    """A yes/no-verifiable distributional statement attached to a node.

    Expectation kind: sum of coeffs . E[c] over the node's outgoing arcs
    is at most rhs.  Probability kind: the mass of one outgoing arc's
    cost inside [lo, hi] is at most q.  The family tag records how the
    statement was generated (individual / difference / sum / probability)
    and drives the forced-resolution rule during verification.
    """

    node: int
    kind: str  # "expectation" | "probability"
    family: str = "individual"
    coeffs: tuple[tuple[int, float], ...] = ()
    rhs: float = 0.0
    arc: int = -1
    lo: float = 0.5
    hi: float = 1.0
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in ("expectation", "probability"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "expectation" and not self.coeffs:
            raise ValueError("expectation constraint needs coefficients")
        if self.kind == "probability" and self.arc < 0:
            raise ValueError("probability constraint needs an arc")


@dataclass(frozen=True)
class ResponseVector:
    """Binary answers to the auxiliary list; bit 1 means 'satisfied'."""

    bits: tuple[int, ...]

    @property
    def index(self) -> int:
        """Scenario index in 1..2^k: one plus the binary value of bits."""
        return 1 + sum(b << m for m, b in enumerate(self.bits))

    @staticmethod
    def from_index(j: int, k: int) -> "ResponseVector":
        if not (1 <= j <= 1 << k):
            raise ValueError(f"index {j} out of range for {k} constraints")
        v = j - 1
        return ResponseVector(tuple((v >> m) & 1 for m in range(k)))

    @staticmethod
    def all_vectors(k: int) -> list["ResponseVector"]:
        return [ResponseVector.from_index(j, k) for j in range(1, (1 << k) + 1)]


@dataclass(frozen=True)
class Polyhedron:
    """Expected-cost set: per-arc box plus general <= rows."""

    lower: np.ndarray
    upper: np.ndarray
    rows: tuple[tuple[tuple[tuple[int, float], ...], float], ...]

    @property
    def n_arcs(self) -> int:
        return len(self.lower)

    @property
    def box_crossed(self) -> bool:
        return bool(np.any(self.lower > self.upper))

    def canonical_rows(self):
        """All rows as (coeffs dict, rhs) pairs with the box materialized.

        Order is fixed: upper box rows per arc, lower box rows per arc,
        then the general rows; dual vectors index this layout.
        """
        out = []
        for a in range(self.n_arcs):
            out.append(({a: 1.0}, float(self.upper[a])))
        for a in range(self.n_arcs):
            out.append(({a: -1.0}, float(-self.lower[a])))
        for coeffs, rhs in self.rows:
            out.append((dict(coeffs), float(rhs)))
        return out


def _perturb_intervals(intervals: list[list[float]]) -> None:
    """Separate opposite endpoints of distinct subintervals in place.

    The support (index 0) is never moved; later intervals get widened by
    tiny steps until no lower endpoint coincides with another interval's
    upper endpoint.
    """
    support_lo, support_hi = intervals[0]
    for _ in range(4):
        dirty = False
        for j in range(1, len(intervals)):
            lo_j, hi_j = intervals[j]
            for k, (lo_k, hi_k) in enumerate(intervals):
                if k == j:
                    continue
                if lo_j == hi_k and lo_j > support_lo:
                    lo_j = max(support_lo, lo_j - _PERTURB)
                    dirty = True
                if hi_j == lo_k and hi_j < support_hi:
                    hi_j = min(support_hi, hi_j + _PERTURB)
                    dirty = True
            intervals[j] = [lo_j, hi_j]
        if not dirty:
            return


def marginal_expectation_bounds(
        constraints) -> tuple[float, float]:
    """Tightest bounds on one arc's expected cost under its constraints.

    Solved as a pair of finite LPs over distributions whose atoms sit at
    subinterval endpoints, plus one atom per open cell between adjacent
    endpoints valued at the favorable end of the cell.  Raises
    InfeasibleAmbiguity when no distribution fits.
    """
    constraints = list(constraints)
    if not constraints:
        raise ValueError("need at least the support constraint")
    support = constraints[0]
    if not (support.q_lo == support.q_hi == 1.0):
        raise ValueError("first constraint must be the support")
    if support.hi - support.lo <= 0.0:
        point = support.lo
        for pc in constraints:
            inside = pc.lo <= point <= pc.hi
            mass = 1.0 if inside else 0.0
            if not (pc.q_lo - 1e-12 <= mass <= pc.q_hi + 1e-12):
                raise InfeasibleAmbiguity("degenerate support contradicts constraints")
        return point, point

    intervals = [[pc.lo, pc.hi] for pc in constraints]
    _perturb_intervals(intervals)

    points = sorted({e for lo, hi in intervals for e in (lo, hi)})
    # atoms: closed breakpoints, then one per open cell between neighbors
    n_closed = len(points)
    cells = list(zip(points[:-1], points[1:]))
    n_atoms = n_closed + len(cells)
    value_min = np.empty(n_atoms)
    value_max = np.empty(n_atoms)
    value_min[:n_closed] = points
    value_max[:n_closed] = points
    for c, (a, b) in enumerate(cells):
        value_min[n_closed + c] = a
        value_max[n_closed + c] = b

    def members(lo: float, hi: float) -> list[int]:
        out = [k for k, p in enumerate(points) if lo <= p <= hi]
        out += [n_closed + c for c, (a, b) in enumerate(cells)
                if lo <= a and b <= hi]
        return out

    def build(values: np.ndarray, sense: str) -> LinearProgram:
        lp = LinearProgram("moment", sense)
        for k in range(n_atoms):
            lp.add_var(f"m{k}", 0.0, 1.0, obj=float(values[k]))
        for (lo, hi), pc in zip(intervals, constraints):
            idx = members(lo, hi)
            coeffs = {k: 1.0 for k in idx}
            if pc.q_lo == pc.q_hi:
                lp.add_row(coeffs, "eq", pc.q_lo)
            else:
                if pc.q_hi < 1.0:
                    lp.add_row(coeffs, "le", pc.q_hi)
                if pc.q_lo > 0.0:
                    lp.add_row(coeffs, "ge", pc.q_lo)
        return lp

    low = solve_lp(build(value_min, "min"))
    if low.status != "optimal":
        raise InfeasibleAmbiguity("probability constraints admit no distribution")
    high = solve_lp(build(value_max, "max"))
    if high.status != "optimal":
        raise InfeasibleAmbiguity("probability constraints admit no distribution")
    return float(low.objective), float(high.objective)


def build_base_polytope(amb: AmbiguitySet) -> Polyhedron:
    """Expected-cost polytope of the full family: box plus expectation rows."""
    lower = np.empty(amb.n_arcs)
    upper = np.empty(amb.n_arcs)
    for a in range(amb.n_arcs):
        lower[a], upper[a] = marginal_expectation_bounds(amb.arc_constraints(a))
    rows = []
    for row in amb.expectation_rows:
        rows.append((row.coeffs, row.rhs))
        if row.sense == "eq":
            rows.append((tuple((a, -v) for a, v in row.coeffs), -row.rhs))
    return Polyhedron(lower, upper, tuple(rows))


def partition_polytope(base: Polyhedron, amb: AmbiguitySet,
                       aux_list, response: ResponseVector) -> Polyhedron:
    """Sub-polytope consistent with one vector of yes/no responses.

    Expectation constraints append their row (bit 1) or the opposite row
    (bit 0, closed).  Probability constraints re-derive the arc's box
    with the thresholded constraint added; an unsatisfiable combination
    yields a crossed box, i.e. a legal empty polytope.
    """
    if len(response.bits) != len(aux_list):
        raise ValueError("response length must match the auxiliary list")
    lower = base.lower.copy()
    upper = base.upper.copy()
    rows = list(base.rows)
    for bit, aux in zip(response.bits, aux_list):
        if aux.kind == "expectation":
            if bit:
                rows.append((aux.coeffs, aux.rhs))
            else:
                rows.append((tuple((a, -v) for a, v in aux.coeffs), -aux.rhs))
        else:
            if bit:
                extra = ProbabilityConstraint(aux.arc, aux.lo, aux.hi, 0.0, aux.q)
            else:
                extra = ProbabilityConstraint(aux.arc, aux.lo, aux.hi, aux.q, 1.0)
            pcs = list(amb.arc_constraints(aux.arc)) + [extra]
            try:
                lo_new, up_new = marginal_expectation_bounds(pcs)
            except InfeasibleAmbiguity:
                lower[aux.arc] = upper[aux.arc] + 1.0
                continue
            lower[aux.arc] = max(lower[aux.arc], lo_new)
            upper[aux.arc] = min(upper[aux.arc], up_new)
    return Polyhedron(lower, upper, tuple(rows))


def is_feasible(p: Polyhedron) -> bool:
    """Phase-one check that the polyhedron contains a point."""
    if p.box_crossed:
        return False
    if not p.rows:
        return True
    lp = LinearProgram("feas", "min")
    for a in range(p.n_arcs):
        lp.add_var(f"c{a}", float(p.lower[a]), float(p.upper[a]))
    for coeffs, rhs in p.rows:
        lp.add_row(dict(coeffs), "le", rhs)
    return solve_lp(lp).status == "optimal"


def refines(base: Polyhedron, part: Polyhedron, tol: float = 1e-9) -> bool:
    """True when the partition genuinely cuts the base polytope.

    Each added row and each tightened box side is tested by optimizing
    its slack over the base set; a violation beyond tol means the
    constraint removes base points.
    """
    if part.box_crossed:
        return is_feasible(base)

    def optimize(coeffs: dict[int, float], sense: str) -> float | None:
        lp = LinearProgram("refine", sense)
        for a in range(base.n_arcs):
            lp.add_var(f"c{a}", float(base.lower[a]), float(base.upper[a]))
        for rc, rr in base.rows:
            lp.add_row(dict(rc), "le", rr)
        for a, v in coeffs.items():
            lp.set_objective(lp.var_index(f"c{a}"), v)
        out = solve_lp(lp)
        return None if out.status != "optimal" else out.objective

    for coeffs, rhs in part.rows[len(base.rows):]:
        val = optimize(dict(coeffs), "max")
        if val is not None and val > rhs + tol:
            return True
    for a in range(base.n_arcs):
        if part.upper[a] < base.upper[a] - tol:
            val = optimize({a: 1.0}, "max")
            if val is not None and val > part.upper[a] + tol:
                return True
        if part.lower[a] > base.lower[a] + tol:
            val = optimize({a: 1.0}, "min")
            if val is not None and val < part.lower[a] - tol:
                return True
    return False
