"""Exception hierarchy shared by every module."""


class QPLAError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(QPLAError, ValueError):
    """Invalid parameters or inputs, detected before any computation."""


class NumericalError(QPLAError, ArithmeticError):
    """A computation could not be carried out reliably."""


class SingularKernelError(NumericalError):
    """The Green's kernel does not exist because omega*T sits on a multiple of pi."""

    def __init__(self, m: int, sin_omega_T: float):
        self.m = m
        self.sin_omega_T = sin_omega_T
        super().__init__(
            f"resonance: omega*T is within guard of {m}*pi "
            f"(|sin(omega*T)| = {abs(sin_omega_T):.3e} <= 1e-8); "
            f"the Green's kernel is singular"
        )


class PoleError(NumericalError):
    """An operator function was evaluated at (or too close to) a pole."""


class ConditioningError(NumericalError):
    """A linear system is too badly conditioned to solve."""
