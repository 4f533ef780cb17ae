from __future__ import annotations

from dataclasses import dataclass

BRANCHING_RULES = ("most-fractional", "pseudo-cost")


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the embedded LP / branch-and-bound core."""

    gap: float = 1e-6
    feasibility_tol: float = 1e-7
    node_limit: int | None = None
    time_limit: float | None = None
    branching: str = "most-fractional"
    seed: int = 0
    log_interval: int = 200

    def violations(self) -> list[str]:
        out = []
        if not self.gap > 0:
            out.append("gap tolerance must be > 0")
        if not self.feasibility_tol > 0:
            out.append("feasibility tolerance must be > 0")
        if self.branching not in BRANCHING_RULES:
            out.append(f"branching must be one of {BRANCHING_RULES}")
        if self.node_limit is not None and self.node_limit < 1:
            out.append("node_limit must be ≥ 1")
        if self.time_limit is not None and self.time_limit <= 0:
            out.append("time_limit must be > 0")
        return out
