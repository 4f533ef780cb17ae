"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a battery-model function."""


class ConfigurationError(ValueError):
    """A configuration object cannot be used (e.g. an empty table)."""


class DataError(ValueError):
    """A time-series file is malformed (gaps, duplicates, bad values)."""


class ValidationError(ValueError):
    """One or more invariant violations, reported together."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BuildError(ValueError):
    """A scenario cannot be translated into a model."""


class SolverError(RuntimeError):
    """The LP/MILP core failed numerically (stall, singular basis)."""


class ExtractionError(RuntimeError):
    """Solver output is inconsistent with the model it claims to solve."""


class MpsFormatError(ValueError):
    """Malformed MPS input; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
