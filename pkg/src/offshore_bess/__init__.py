"""Offshore wind + battery dispatch: MILP formulation, embedded solver and oracles."""

__version__ = "0.1.0"
