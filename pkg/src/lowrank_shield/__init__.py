"""Low-rank tensor reconstruction as a preprocessing defense for image classifiers."""

from .errors import DataError, DomainError, NumericalError, ShieldError, UsageError
from .linalg import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataError",
    "DomainError",
    "NumericalError",
    "ShieldError",
    "UsageError",
    "__version__",
]
