"""Containers for linear and mixed-integer models.

A model is a list of bounded variables, a sparse objective, and sparse
rows with senses le/ge/eq.  Variables are looked up by name through the
registry, so formulation builders can wire rows symbolically and tests
can inspect solutions by name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class Variable:
    name: str
    lo: float
    up: float
    integer: bool = False


@dataclass
class Row:
    coeffs: dict[int, float]
    sense: str  # "le" | "ge" | "eq"
    rhs: float
    name: str = ""


_SENSES = ("le", "ge", "eq")


class LinearProgram:
    """Sparse LP container: bounded variables, senses le/ge/eq, min or max."""

    def __init__(self, name: str = "lp", sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be min or max, got {sense!r}")
        self.name = name
        self.sense = sense
        self.variables: list[Variable] = []
        self.objective: dict[int, float] = {}
        self.rows: list[Row] = []
        self.registry: dict[str, int] = {}

    # -- construction -----------------------------------------------------

    def add_var(self, name: str, lo: float = 0.0, up: float = math.inf,
                obj: float = 0.0, integer: bool = False) -> int:
        if integer and not isinstance(self, MixedIntegerProgram):
            raise ValueError("integer variables require a MixedIntegerProgram")
        if name in self.registry:
            raise ValueError(f"duplicate variable name {name!r}")
        if not (lo <= up):
            raise ValueError(f"empty bounds for {name!r}: [{lo}, {up}]")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lo), float(up), integer))
        self.registry[name] = idx
        if obj:
            self.objective[idx] = float(obj)
        return idx

    def set_objective(self, idx: int, coeff: float) -> None:
        if coeff == 0.0:
            self.objective.pop(idx, None)
        else:
            self.objective[idx] = float(coeff)

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float,
                name: str = "") -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        clean = {}
        for idx, val in coeffs.items():
            if not (0 <= idx < len(self.variables)):
                raise ValueError(f"row references unknown variable index {idx}")
            if not math.isfinite(val):
                raise ValueError("row coefficients must be finite")
            if val != 0.0:
                clean[idx] = float(val)
        self.rows.append(Row(clean, sense, float(rhs), name))
        return len(self.rows) - 1

    # -- queries -----------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def var_index(self, name: str) -> int:
        return self.registry[name]

    def value_of(self, x, name: str) -> float:
        return float(x[self.registry[name]])

    # -- export ------------------------------------------------------------

    def to_lp_text(self) -> str:
        """Render in the conventional human-readable LP text format."""
        out = []
        out.append("Minimize" if self.sense == "min" else "Maximize")
        terms = [f"{c:+.17g} {self.variables[i].name}"
                 for i, c in sorted(self.objective.items())]
        out.append(" obj: " + (" ".join(terms) if terms else "0"))
        out.append("Subject To")
        op = {"le": "<=", "ge": ">=", "eq": "="}
        for k, row in enumerate(self.rows):
            terms = [f"{c:+.17g} {self.variables[i].name}"
                     for i, c in sorted(row.coeffs.items())]
            label = row.name or f"c{k}"
            out.append(f" {label}: " + " ".join(terms)
                       + f" {op[row.sense]} {row.rhs:.17g}")
        out.append("Bounds")
        for v in self.variables:
            lo = "-inf" if v.lo == -math.inf else f"{v.lo:.17g}"
            up = "+inf" if v.up == math.inf else f"{v.up:.17g}"
            out.append(f" {lo} <= {v.name} <= {up}")
        integers = [v.name for v in self.variables if v.integer]
        if integers:
            out.append("Generals")
            out.append(" " + " ".join(integers))
        out.append("End")
        return "\n".join(out) + "\n"


class MixedIntegerProgram(LinearProgram):
    """LinearProgram plus integrality flags."""

    def __init__(self, name: str = "mip", sense: str = "min"):
        super().__init__(name, sense)

    def add_binary(self, name: str, obj: float = 0.0) -> int:
        return self.add_var(name, 0.0, 1.0, obj, integer=True)

    @property
    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.integer]

    def relaxation(self) -> LinearProgram:
        """Continuous copy sharing no mutable state with the original."""
        lp = LinearProgram(self.name + "_relax", self.sense)
        for v in self.variables:
            lp.add_var(v.name, v.lo, v.up)
        lp.objective = dict(self.objective)
        lp.rows = [Row(dict(r.coeffs), r.sense, r.rhs, r.name) for r in self.rows]
        return lp
