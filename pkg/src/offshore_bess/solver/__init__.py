"""Embedded LP/MILP core, MPS codec and an independent feasibility audit."""

from .options import SolverOptions

__all__ = ["SolverOptions"]
