"""MILP container shared by the builder, the solver core and the MPS codec.

A model is a list of named columns with bounds, a list of sparse rows with a
sense and right-hand side, and a maximization objective with a constant
term. Columns and rows are appended through :class:`ModelBuilder`; the
finished :class:`MilpModel` is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
import scipy.sparse as sp

from .errors import BuildError

SENSES = ("L", "E", "G")


@dataclass(frozen=True)
class Column:
    name: str
    symbol: str
    index: tuple
    lb: float
    ub: float
    binary: bool = False
    block: str = ""


@dataclass(frozen=True)
class Row:
    name: str
    family: str
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True, eq=False)
class MilpModel:
    columns: tuple[Column, ...]
    rows: tuple[Row, ...]
    objective: np.ndarray
    objective_constant: float = 0.0
    meta: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    name: str = "model"

    def __post_init__(self):
        self.objective.setflags(write=False)
        object.__setattr__(self, "_index", {c.name: i for i, c in enumerate(self.columns)})

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def binaries(self) -> list[int]:
        return [j for j, c in enumerate(self.columns) if c.binary]

    def col(self, name: str) -> int:
        return self._index[name]

    def has(self, name: str) -> bool:
        return name in self._index

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([c.lb for c in self.columns], dtype=float)
        ub = np.array([c.ub for c in self.columns], dtype=float)
        return lb, ub

    def matrix(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for i, r in enumerate(self.rows):
            for j, v in r.coeffs:
                rows.append(i)
                cols.append(j)
                vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_cols))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Row activity bounds: L rows are (-inf, rhs], G rows [rhs, inf)."""
        lo = np.array([-np.inf if r.sense == "L" else r.rhs for r in self.rows])
        hi = np.array([np.inf if r.sense == "G" else r.rhs for r in self.rows])
        return lo, hi

    def evaluate(self, x) -> float:
        return float(np.dot(self.objective, x)) + self.objective_constant

    def relaxed(self) -> MilpModel:
        """Same model with every binary treated as a continuous [0, 1] column."""
        cols = tuple(Column(c.name, c.symbol, c.index, c.lb, c.ub, False, c.block)
                     for c in self.columns)
        return MilpModel(cols, self.rows, self.objective.copy(), self.objective_constant,
                         self.meta, self.name)

    def with_bounds(self, changes: dict[int, tuple[float, float]]) -> MilpModel:
        cols = list(self.columns)
        for j, (lo, hi) in changes.items():
            c = cols[j]
            cols[j] = Column(c.name, c.symbol, c.index, lo, hi, c.binary, c.block)
        return MilpModel(tuple(cols), self.rows, self.objective.copy(),
                         self.objective_constant, self.meta, self.name)

    def families(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.rows:
            out[r.family] = out.get(r.family, 0) + 1
        return out


class ModelBuilder:
    """Mutable accumulator for columns, rows and objective terms."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.columns: list[Column] = []
        self.rows: list[Row] = []
        self.obj: dict[int, float] = {}
        self.constant = 0.0
        self._index: dict[str, int] = {}
        self._row_names: set[str] = set()

    def add_col(self, symbol: str, index: tuple = (), lb: float = 0.0, ub: float = np.inf,
                binary: bool = False, block: str = "", cost: float = 0.0) -> int:
        name = symbol + ("(" + ",".join(str(i) for i in index) + ")" if index else "")
        if name in self._index:
            raise BuildError(f"duplicate column {name}")
        if binary:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise BuildError(f"column {name}: lower bound {lb} above upper bound {ub}")
        j = len(self.columns)
        self.columns.append(Column(name, symbol, tuple(index), float(lb), float(ub), binary, block))
        self._index[name] = j
        if cost:
            self.obj[j] = self.obj.get(j, 0.0) + cost
        return j

    def col(self, name: str) -> int:
        return self._index[name]

    def add_row(self, family: str, index: tuple, terms, sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise BuildError(f"bad sense {sense!r}")
        name = family + ("(" + ",".join(str(i) for i in index) + ")" if index else "")
        if name in self._row_names:
            raise BuildError(f"duplicate row {name}")
        merged: dict[int, float] = {}
        for j, v in terms:
            if not 0 <= j < len(self.columns):
                raise BuildError(f"row {name} references unknown column {j}")
            merged[j] = merged.get(j, 0.0) + float(v)
        coeffs = tuple(sorted((j, v) for j, v in merged.items() if v != 0.0))
        self.rows.append(Row(name, family, coeffs, sense, float(rhs)))
        self._row_names.add(name)
        return len(self.rows) - 1

    def add_cost(self, j: int, value: float) -> None:
        self.obj[j] = self.obj.get(j, 0.0) + value

    def finish(self, meta: dict | None = None) -> MilpModel:
        c = np.zeros(len(self.columns))
        for j, v in self.obj.items():
            c[j] = v
        return MilpModel(tuple(self.columns), tuple(self.rows), c, self.constant,
                         MappingProxyType(dict(meta or {})), self.name)


# -- published sizing ------------------------------------------------------------

@dataclass(frozen=True)
class ModelSize:
    columns: int
    rows: int
    binaries: int


def block_size(tier: str, T: int, D: int, K: int, L: int, N: int) -> ModelSize:
    """Columns/rows/binaries contributed by one battery block.

    basic: 7T columns (P_d, P_d^loss, P_c, P_c^loss, C, S, B), 8T rows
    (four big-M exclusivity rows on power and loss, energy and SOC recursions,
    two constant-slope loss rows), T binaries.

    dynamic-efficiency: (9 + K(L + N + 1))T columns (adds alpha_d, alpha_c,
    w_d, w_c, U), (15 + 4K + K(L + N))T rows, T(1 + K) binaries.

    cycling-degradation adds 2D columns (C_act, Q_cyc) and 2T + 2D rows (two
    capacity-window rows per hour, Q_cyc definition and C_act ≤ Q_cyc per
    day). calendar-degradation adds D more rows (C_act ≤ Q_cal).
    """
    if tier == "basic":
        return ModelSize(7 * T, 8 * T, T)
    cols = (9 + K * (L + N + 1)) * T
    rows = (15 + 4 * K + K * (L + N)) * T
    if tier in ("cycling-degradation", "calendar-degradation"):
        cols += 2 * D
        rows += 2 * T + 2 * D
    if tier == "calendar-degradation":
        rows += D
    return ModelSize(cols, rows, T * (1 + K))


def expected_size(topology: str, tier: str, T: int, D: int, K: int, L: int, N: int,
                  cable_free: bool, blocks: int = 1) -> ModelSize:
    """Exact model size for a full-horizon build.

    Shared columns are E_s, P_cab, P_curt and P_s (4T) for the no-battery
    layout; battery layouts add E_p and P_cW (6T), and the hybrid layout
    carries one P_s/P_cW pair per present block (6T + blocks·T). A free
    cable adds the single C_cab column.

    Shared rows: no-battery 3T, onshore 4T, offshore 4T, hybrid 5T; a free
    cable adds T capacity rows (2T offshore, where cable flow is signed).
    """
    c = 1 if cable_free else 0
    if topology == "no-battery":
        return ModelSize(4 * T + c, 3 * T + c * T, 0)
    b = block_size(tier, T, D, K, L, N)
    if topology == "hybrid":
        base_cols, base_rows = 6 * T + blocks * T, 5 * T + c * T
    else:
        blocks = 1
        base_cols = 6 * T
        base_rows = 4 * T + c * T * (2 if topology == "offshore" else 1)
    return ModelSize(base_cols + c + blocks * b.columns, base_rows + blocks * b.rows,
                     blocks * b.binaries)
