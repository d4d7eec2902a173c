"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`DataError` to
exit code 3; everything else is a programming error and propagates.
"""


class MindMeshError(Exception):
    """Base class for all package errors."""


class ConfigError(MindMeshError, ValueError):
    """Invalid configuration value or combination of values."""


class DataError(MindMeshError, ValueError):
    """Input data violates a contract (non-finite samples, bad file, ...)."""


class DimensionError(MindMeshError, ValueError):
    """Array shapes are incompatible with an operation."""


class ContractError(MindMeshError, RuntimeError):
    """An API precondition was violated by the caller."""


class DegenerateGeometryError(MindMeshError, ValueError):
    """Geometry is too degenerate for the requested computation."""


class RankError(MindMeshError, ValueError):
    """A linear system is underdetermined or rank deficient."""

    def __init__(self, message, deficiency=None):
        super().__init__(message)
        self.deficiency = deficiency


class SolverError(MindMeshError, RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateSequenceError(DataError):
    """An evaluated sequence has zero ground-truth range, so normalised errors are undefined."""


class TrainingError(MindMeshError, RuntimeError):
    """Training cannot continue (for example the loss became non-finite)."""
