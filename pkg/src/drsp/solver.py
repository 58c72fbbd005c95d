"""Embedded LP and MIP engines.

``solve_lp`` is a two-phase primal simplex on a bounded-variable dense
tableau: Dantzig pricing with a Bland fallback after a run of degenerate
pivots, artificial columns only for rows violated at the initial point,
and dual values read off the final tableau.  ``solve_mip`` wraps it in
best-bound branch and bound with most-fractional branching.

Everything is deterministic: fixed tie-breaking everywhere, no
randomization, identical inputs give identical pivot sequences and node
counts.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import pivot_update
from .model import LinearProgram, MixedIntegerProgram

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
INT_TOL = 1e-6
GAP_ABS = 1e-6
GAP_REL = 1e-9
_DEGEN_TOL = 1e-9
_RATE_TOL = 1e-10

_AT_LO, _AT_UP, _FREE, _BASIC = 0, 1, 2, 3
_LE, _GE, _EQ = 0, 1, 2
_SENSE_CODE = {"le": _LE, "ge": _GE, "eq": _EQ}


class NumericalFailure(RuntimeError):
    """Pivot budget exhausted or basis too ill-conditioned to repair."""


@dataclass
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float | None = None
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0


@dataclass
class MipOutcome:
    status: str  # "optimal" | "infeasible" | "time_limit"
    objective: float | None = None
    x: np.ndarray | None = None
    bound: float | None = None
    nodes: int = 0
    wall_time: float = 0.0


@dataclass
class _Norm:
    """Dense snapshot of a model, reused across branch-and-bound nodes."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    maximize: bool
    row_map: list[int | None]  # original row -> dense row (None = empty row)
    n_orig_rows: int
    trivially_infeasible: bool = False


def _normalize(lp: LinearProgram) -> _Norm:
    n = lp.n_vars
    lo = np.array([v.lo for v in lp.variables], dtype=float)
    up = np.array([v.up for v in lp.variables], dtype=float)
    c = np.zeros(n)
    for j, v in lp.objective.items():
        c[j] = v
    maximize = lp.sense == "max"
    if maximize:
        c = -c

    kept: list[int] = []
    row_map: list[int | None] = []
    bad = False
    for k, row in enumerate(lp.rows):
        if row.coeffs:
            row_map.append(len(kept))
            kept.append(k)
        else:
            row_map.append(None)
            z, rhs = 0.0, row.rhs
            if ((row.sense == "le" and z > rhs + FEAS_TOL)
                    or (row.sense == "ge" and z < rhs - FEAS_TOL)
                    or (row.sense == "eq" and abs(rhs) > FEAS_TOL)):
                bad = True
    m = len(kept)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = np.zeros(m, dtype=np.int8)
    for i, k in enumerate(kept):
        row = lp.rows[k]
        for j, v in row.coeffs.items():
            A[i, j] = v
        b[i] = row.rhs
        senses[i] = _SENSE_CODE[row.sense]
    return _Norm(c, A, b, senses, lo, up, maximize, row_map, len(lp.rows),
                 trivially_infeasible=bad)


class _Simplex:
    """One solve on a normalized model with explicit variable bounds."""

    def __init__(self, norm: _Norm, lo: np.ndarray, up: np.ndarray,
                 pivot_limit: int | None = None):
        self.norm = norm
        m, n = norm.A.shape
        self.m, self.n = m, n
        self.b = norm.b
        slack_lo = np.where(norm.senses == _GE, -np.inf, 0.0)
        slack_up = np.where(norm.senses == _LE, np.inf, 0.0)

        x0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(up), up, 0.0))
        sval = norm.b - norm.A @ x0 if m else np.zeros(0)
        viol_up = sval > slack_up + FEAS_TOL
        viol_lo = sval < slack_lo - FEAS_TOL
        self.art_rows = np.flatnonzero(viol_up | viol_lo)
        na = len(self.art_rows)

        self.N = n + m + na
        self.col_lo = np.concatenate([lo, slack_lo, np.zeros(na)])
        self.col_up = np.concatenate([up, slack_up, np.zeros(na)])
        self.state = np.full(self.N, _AT_LO, dtype=np.int8)
        self.state[:n] = np.where(
            np.isfinite(lo), _AT_LO, np.where(np.isfinite(up), _AT_UP, _FREE))

        T = np.zeros((m + 1, self.N))
        T[:m, :n] = norm.A
        T[np.arange(m), n + np.arange(m)] = 1.0
        self.T = T

        self.basis = n + np.arange(m)
        self.xB = sval.copy()
        self.phase1_cost = np.zeros(self.N)
        for k, i in enumerate(self.art_rows):
            col = n + m + k
            self.T[i, col] = 1.0
            if viol_up[i]:
                bound = slack_up[i]
                self.col_lo[col], self.col_up[col] = 0.0, np.inf
                self.phase1_cost[col] = 1.0
                self.state[n + i] = _AT_UP
            else:
                bound = slack_lo[i]
                self.col_lo[col], self.col_up[col] = -np.inf, 0.0
                self.phase1_cost[col] = -1.0
                self.state[n + i] = _AT_LO
            self.basis[i] = col
            self.xB[i] = sval[i] - bound
        self.state[self.basis] = _BASIC

        self.cost = self.phase1_cost
        self.iterations = 0
        self.bland = False
        self.degen_run = 0
        base = 50 * (m + n)
        self.pivot_limit = pivot_limit if pivot_limit is not None else max(20000, base)
        self.refreshes = 0

    # -- helpers -------------------------------------------------------

    def _set_cost(self, cost: np.ndarray) -> None:
        self.cost = cost
        self.T[self.m, :] = cost - cost[self.basis] @ self.T[:self.m, :]

    def _nonbasic_values(self) -> np.ndarray:
        vals = np.where(self.state == _AT_UP, self.col_up,
                        np.where(self.state == _AT_LO, self.col_lo, 0.0))
        vals[~np.isfinite(vals)] = 0.0
        vals[self.state == _BASIC] = 0.0
        return vals

    def _full_matrix(self) -> np.ndarray:
        m, n = self.m, self.n
        F = np.zeros((m, self.N))
        F[:, :n] = self.norm.A
        F[np.arange(m), n + np.arange(m)] = 1.0
        for k, i in enumerate(self.art_rows):
            F[i, n + m + k] = 1.0
        return F

    def _refresh(self) -> None:
        """Recompute the tableau from the basis to shed accumulated drift."""
        self.refreshes += 1
        if self.refreshes > 8:
            raise NumericalFailure("too many basis refreshes")
        F = self._full_matrix()
        B = F[:, self.basis]
        try:
            self.T[:self.m, :] = np.linalg.solve(B, F)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refresh") from exc
        vals = self._nonbasic_values()
        rhs = self.b - F @ vals
        self.xB = np.linalg.solve(B, rhs)
        self._set_cost(self.cost)

    def _solution(self) -> np.ndarray:
        x = self._nonbasic_values()[:self.n]
        for r, col in enumerate(self.basis):
            if col < self.n:
                x[col] = self.xB[r]
        return x

    def _primal_residual(self, x: np.ndarray) -> float:
        if self.m == 0:
            return 0.0
        ax = self.norm.A @ x
        res_up = ax - self.b
        res_lo = self.b - ax
        worst = 0.0
        for i in range(self.m):
            s = self.norm.senses[i]
            if s == _LE:
                worst = max(worst, res_up[i])
            elif s == _GE:
                worst = max(worst, res_lo[i])
            else:
                worst = max(worst, abs(res_up[i]))
        return worst

    # -- core iteration -------------------------------------------------

    def _choose_entering(self):
        d = self.T[self.m]
        lo_side = (self.state == _AT_LO) | (self.state == _FREE)
        up_side = (self.state == _AT_UP) | (self.state == _FREE)
        open_col = self.col_lo < self.col_up
        free_col = self.state == _FREE
        s_lo = np.where(lo_side & (open_col | free_col), -d, -np.inf)
        s_up = np.where(up_side & (open_col | free_col), d, -np.inf)
        score = np.maximum(s_lo, s_up)
        score[self.state == _BASIC] = -np.inf
        if self.bland:
            ok = np.flatnonzero(score > OPT_TOL)
            if ok.size == 0:
                return None
            q = int(ok[0])
        else:
            q = int(np.argmax(score))
            if score[q] <= OPT_TOL:
                return None
        direction = 1 if s_lo[q] >= s_up[q] else -1
        return q, direction

    def _ratio_test(self, q: int, direction: int):
        w = self.T[:self.m, q]
        rate = -direction * w
        lim = np.full(self.m, np.inf)
        bl = self.col_lo[self.basis]
        bu = self.col_up[self.basis]
        pos = rate > _RATE_TOL
        neg = rate < -_RATE_TOL
        with np.errstate(invalid="ignore"):
            lim[pos] = (bu[pos] - self.xB[pos]) / rate[pos]
            lim[neg] = (self.xB[neg] - bl[neg]) / (-rate[neg])
        lim[np.isnan(lim)] = np.inf
        np.maximum(lim, 0.0, out=lim)
        if self.m:
            dmin = lim.min()
        else:
            dmin = np.inf
        span = self.col_up[q] - self.col_lo[q]
        if not np.isfinite(min(span, dmin)):
            return -1, np.inf, rate  # unbounded direction
        if span <= dmin:
            return None, span, rate  # bound flip
        cand = np.flatnonzero(lim <= dmin + 1e-9)
        if self.bland:
            r = int(min(cand, key=lambda k: self.basis[k]))
        else:
            r = int(min(cand, key=lambda k: (-abs(w[k]), self.basis[k])))
        return r, lim[r], rate

    def _iterate(self, phase: int) -> str:
        while True:
            pick = self._choose_entering()
            if pick is None:
                return "optimal"
            q, direction = pick
            r, delta, rate = self._ratio_test(q, direction)
            if r == -1:
                if phase == 1:
                    raise NumericalFailure("phase-1 objective unbounded")
                return "unbounded"
            self.iterations += 1
            if self.iterations > self.pivot_limit:
                raise NumericalFailure(
                    f"pivot limit {self.pivot_limit} exceeded")
            if delta <= _DEGEN_TOL:
                self.degen_run += 1
                if self.degen_run > 2 * (self.m + self.n):
                    self.bland = True
            else:
                self.degen_run = 0
                self.bland = False
            if r is None:
                # entering variable flips to its opposite bound
                self.xB += rate * delta
                self.state[q] = _AT_UP if self.state[q] == _AT_LO else _AT_LO
                continue
            start = self.col_lo[q] if self.state[q] == _AT_LO else (
                self.col_up[q] if self.state[q] == _AT_UP else 0.0)
            self.xB += rate * delta
            leaving = self.basis[r]
            if rate[r] > 0:
                self.state[leaving] = _AT_UP
            else:
                # infinite lower bounds never block, so this bound is finite
                self.state[leaving] = _AT_LO
            pivot_update(self.T, r, q)
            self.basis[r] = q
            self.state[q] = _BASIC
            self.xB[r] = start + direction * delta
            if self.iterations % 4096 == 0:
                self._refresh()

    def _phase1_objective(self) -> float:
        total = 0.0
        for r, col in enumerate(self.basis):
            if col >= self.n + self.m:
                total += abs(self.xB[r])
        return total

    def _evict_artificials(self) -> None:
        nm = self.n + self.m
        for r in range(self.m):
            if self.basis[r] < nm:
                continue
            row = self.T[r, :nm]
            cand = np.flatnonzero((np.abs(row) > 1e-7)
                                  & (self.state[:nm] != _BASIC)
                                  & (self.col_lo[:nm] < self.col_up[:nm]))
            if cand.size == 0:
                continue  # redundant row; artificial stays pinned at zero
            q = int(cand[0])
            start = self.col_lo[q] if self.state[q] == _AT_LO else (
                self.col_up[q] if self.state[q] == _AT_UP else 0.0)
            old = self.basis[r]
            self.state[old] = _AT_LO if np.isfinite(self.col_lo[old]) else _AT_UP
            pivot_update(self.T, r, q)
            self.basis[r] = q
            self.state[q] = _BASIC
            self.xB[r] = start
            self.iterations += 1

    def solve(self) -> LpOutcome:
        m, n = self.m, self.n
        scale = max(1.0, float(np.abs(self.b).max()) if m else 1.0)
        if len(self.art_rows):
            self._set_cost(self.phase1_cost)
            self._iterate(1)
            if self._phase1_objective() > FEAS_TOL * scale:
                self._refresh()
                self._iterate(1)
                if self._phase1_objective() > FEAS_TOL * scale:
                    return LpOutcome("infeasible", iterations=self.iterations)
            self._evict_artificials()
        # seal artificial columns so phase 2 cannot reuse them
        self.col_lo[n + m:] = 0.0
        self.col_up[n + m:] = 0.0

        cost2 = np.zeros(self.N)
        cost2[:n] = self.norm.c
        self._set_cost(cost2)
        status = self._iterate(2)
        if status == "unbounded":
            obj = -math.inf if not self.norm.maximize else math.inf
            return LpOutcome("unbounded", objective=obj,
                             iterations=self.iterations)

        x = self._solution()
        for _ in range(3):
            if self._primal_residual(x) <= FEAS_TOL * scale * 10:
                break
            self._refresh()
            self._iterate(2)
            x = self._solution()
        else:
            raise NumericalFailure("could not restore primal feasibility")

        obj = float(self.norm.c @ x)
        d = self.T[m].copy()
        duals_dense = -d[n:n + m]
        reduced = d[:n].copy()
        if self.norm.maximize:
            obj = -obj
            duals_dense = -duals_dense
            reduced = -reduced
        duals = np.zeros(self.norm.n_orig_rows)
        for orig, dense in enumerate(self.norm.row_map):
            if dense is not None:
                duals[orig] = duals_dense[dense]
        return LpOutcome("optimal", obj, x, duals, reduced, self.iterations)


def _solve_norm(norm: _Norm, lo: np.ndarray, up: np.ndarray,
                pivot_limit: int | None = None) -> LpOutcome:
    if norm.trivially_infeasible or np.any(lo > up):
        return LpOutcome("infeasible")
    return _Simplex(norm, lo, up, pivot_limit).solve()


def solve_lp(lp: LinearProgram, pivot_limit: int | None = None) -> LpOutcome:
    """Solve a linear program to a vertex optimum.

    Returns status optimal/infeasible/unbounded; on optimal the outcome
    carries primal values, one dual per model row (zero for empty rows)
    and reduced costs per variable.
    """
    norm = _normalize(lp)
    return _solve_norm(norm, norm.lo.copy(), norm.up.copy(), pivot_limit)


def dual_objective(lp: LinearProgram, out: LpOutcome) -> float:
    """Value of the dual solution carried by an optimal outcome.

    Equals b'y plus the reduced-cost contribution of nonbasic variables
    at their bounds; matches the primal objective when the returned
    duals are consistent.
    """
    if out.status != "optimal":
        raise ValueError("dual objective requires an optimal outcome")
    total = 0.0
    for k, row in enumerate(lp.rows):
        total += out.duals[k] * row.rhs
    for j in range(lp.n_vars):
        total += out.reduced_costs[j] * out.x[j]
    return total


# -- branch and bound ----------------------------------------------------


def solve_mip(mip: MixedIntegerProgram, time_limit: float | None = None,
              node_limit: int | None = None, verbose: bool = False,
              int_tol: float = INT_TOL, gap_abs: float = GAP_ABS,
              gap_rel: float = GAP_REL) -> MipOutcome:
    """Best-bound branch and bound over LP relaxations.

    Branching picks the most fractional integer variable (ties to the
    lowest index); nodes are explored in order of parent bound, then
    depth, then creation.  Every node is solved from scratch.
    """
    t0 = time.perf_counter()
    norm = _normalize(mip)
    int_idx = np.array(mip.integer_indices, dtype=int)
    sense_flip = -1.0 if mip.sense == "max" else 1.0

    def lp_value(out: LpOutcome) -> float:
        # work internally with minimization values
        return sense_flip * out.objective

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    min_fathomed = math.inf
    nodes = 0
    seq = 0
    heap: list[tuple[float, int, int, dict, dict]] = []
    heapq.heappush(heap, (-math.inf, 0, seq, {}, {}))
    out_status = "optimal"

    while heap:
        glb = heap[0][0]
        gap_need = max(gap_abs, gap_rel * abs(inc_obj)) if incumbent is not None else 0.0
        if incumbent is not None and inc_obj - glb <= gap_need:
            break
        if node_limit is not None and nodes >= node_limit:
            out_status = "time_limit"
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            out_status = "time_limit"
            break
        bound, depth, _, lo_over, up_over = heapq.heappop(heap)
        if incumbent is not None and bound >= inc_obj - 1e-12:
            min_fathomed = min(min_fathomed, bound)
            continue
        lo = norm.lo.copy()
        up = norm.up.copy()
        for j, v in lo_over.items():
            lo[j] = v
        for j, v in up_over.items():
            up[j] = v
        res = _solve_norm(norm, lo, up)
        nodes += 1
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            raise NumericalFailure("unbounded LP relaxation in branch and bound")
        val = lp_value(res)
        if verbose:
            print(f"node {nodes}: depth={depth} bound={val:.9g} "
                  f"incumbent={inc_obj if incumbent is not None else None}")
        if incumbent is not None and val >= inc_obj - 1e-12:
            min_fathomed = min(min_fathomed, val)
            continue
        frac = np.abs(res.x[int_idx] - np.round(res.x[int_idx])) if int_idx.size else np.zeros(0)
        if frac.size == 0 or frac.max() <= int_tol:
            if val < inc_obj - 1e-12:
                inc_obj = val
                incumbent = res.x.copy()
            continue
        dist = np.minimum(frac, 1.0 - frac)
        pick = int(np.argmax(dist))
        j = int(int_idx[pick])
        xj = res.x[j]
        lo_child = dict(lo_over)
        up_child = dict(up_over)
        up_child[j] = math.floor(xj)
        seq += 1
        heapq.heappush(heap, (val, depth + 1, seq, dict(lo_over), up_child))
        lo_child[j] = math.ceil(xj)
        seq += 1
        heapq.heappush(heap, (val, depth + 1, seq, lo_child, dict(up_over)))

    wall = time.perf_counter() - t0
    open_bounds = [item[0] for item in heap]
    proven = min(open_bounds) if open_bounds else math.inf
    proven = min(proven, min_fathomed)
    if incumbent is None:
        if out_status == "time_limit":
            bnd = None if not math.isfinite(proven) else sense_flip * proven
            return MipOutcome("time_limit", bound=bnd, nodes=nodes, wall_time=wall)
        return MipOutcome("infeasible", nodes=nodes, wall_time=wall)
    bound_internal = min(proven, inc_obj)
    objective = sense_flip * inc_obj
    bound = sense_flip * bound_internal
    return MipOutcome(out_status, objective, incumbent, bound, nodes, wall)
