"""Multi-parameter quantum estimation bounds on finite-dimensional models.

The package computes and cross-checks the SLD, RLD, Holevo, Nagaoka-Hayashi
and Gill-Massar Cramer-Rao bounds, ships a primal-dual interior-point SDP
solver, and reproduces random-sampling experiments on the ratio between
individual and collective measurement bounds.
"""

from .errors import (
    InvalidModelError,
    InvalidStateError,
    QcrbError,
    SingularInformationError,
    SolverError,
    UnsupportedDimensionError,
)

__version__ = "0.1.0"

__all__ = [
    "InvalidModelError",
    "InvalidStateError",
    "QcrbError",
    "SingularInformationError",
    "SolverError",
    "UnsupportedDimensionError",
    "__version__",
]
