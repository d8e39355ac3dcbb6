"""Quantum least-action ground state of the Pais-Uhlenbeck oscillator on a time grid."""
from .errors import (
    ConditioningError,
    ConfigurationError,
    NumericalError,
    PoleError,
    QPLAError,
    SingularKernelError,
)
from .puoperator import PUParams
from .timegrid import TimeGrid, Trajectory, make_grid

__all__ = [
    "ConditioningError",
    "ConfigurationError",
    "NumericalError",
    "PoleError",
    "PUParams",
    "QPLAError",
    "SingularKernelError",
    "TimeGrid",
    "Trajectory",
    "make_grid",
]
__version__ = "0.1.0"
