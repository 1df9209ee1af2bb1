"""Exception hierarchy shared by all modules."""


class QcrbError(Exception):
    """Base class for library errors."""


class SolverError(QcrbError):
    """A numerical routine failed to converge or broke down."""


class InvalidModelError(QcrbError, ValueError):
    """A statistical model or state violates one of its invariants."""


class InvalidStateError(InvalidModelError):
    """A candidate density matrix is not positive semidefinite."""


class UnsupportedDimensionError(QcrbError, ValueError):
    """No construction is available for the requested dimension."""


class SingularInformationError(QcrbError, ValueError):
    """A Fisher information matrix is singular."""
