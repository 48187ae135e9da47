"""Exception types shared across the package."""


class SisqError(Exception):
    """Base class for all domain errors raised by sisq."""


class GraphFormatError(SisqError):
    """Malformed graph or community-spec file (message carries the line number)."""


class PartitionError(SisqError):
    """Invalid partition: overlap, gap, unknown node id, or empty cell."""


class NotEquitableError(SisqError):
    """An operation that requires an equitable partition was given something else."""

    def __init__(self, violation=None, message=None):
        self.violation = violation
        if message is None and violation is not None:
            message = f"partition is not equitable: {violation}"
        super().__init__(message or "partition is not equitable")


class InfeasibleSpecError(SisqError):
    """Community spec asks for a graph that cannot exist (integrality, degree bounds)."""


class PerturbationError(SisqError):
    """Perturbed graph pair violates the decomposition preconditions."""


class IntegrationError(SisqError):
    """ODE state left the unit box or produced NaN; the step size is too large."""
