"""Independent feasibility check of a candidate point.

Plain Python over the model's row and column records: no sparse matrices,
no code shared with the simplex, so it can audit the solver's output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..model import MilpModel


@dataclass(frozen=True)
class Violation:
    kind: str  # bound | row | integrality | objective
    name: str
    amount: float

    def __str__(self) -> str:
        return f"{self.kind} {self.name} violated by {self.amount:.3g}"


def _scale(*values: float) -> float:
    return max([1.0] + [abs(v) for v in values if math.isfinite(v)])


def check_feasibility(model: MilpModel, x, tol: float = 1e-6, objective: float | None = None,
                      integrality_tol: float = 1e-6) -> list[Violation]:
    """Return every violated bound, row, integrality and objective condition.

    Bounds and rows use a tolerance relative to the magnitude of the limit;
    binaries must sit within ``integrality_tol`` of 0 or 1. When
    ``objective`` is given it must equal the recomputed objective to a
    relative 1e-5.
    """
    x = [float(v) for v in x]
    if len(x) != len(model.columns):
        return [Violation("shape", "x", abs(len(x) - len(model.columns)))]
    out = []
    for col, v in zip(model.columns, x):
        if not math.isfinite(v):
            out.append(Violation("bound", col.name, math.inf))
            continue
        if v < col.lb - tol * _scale(col.lb):
            out.append(Violation("bound", col.name, col.lb - v))
        if v > col.ub + tol * _scale(col.ub):
            out.append(Violation("bound", col.name, v - col.ub))
        if col.binary:
            off = min(abs(v), abs(v - 1.0))
            if off > integrality_tol:
                out.append(Violation("integrality", col.name, off))
    for row in model.rows:
        act = 0.0
        big = abs(row.rhs)
        for j, a in row.coeffs:
            term = a * x[j]
            act += term
            big = max(big, abs(term))
        slack = tol * max(1.0, big)
        if row.sense in ("L", "E") and act > row.rhs + slack:
            out.append(Violation("row", row.name, act - row.rhs))
        if row.sense in ("G", "E") and act < row.rhs - slack:
            out.append(Violation("row", row.name, row.rhs - act))
    if objective is not None:
        value = model.objective_constant + sum(c * v for c, v in zip(model.objective, x))
        if abs(value - objective) > 1e-5 * max(1.0, abs(value)):
            out.append(Violation("objective", "objective", abs(value - objective)))
    return out
