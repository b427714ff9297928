"""Exception hierarchy shared by every rblab module."""


class RBLabError(Exception):
    """Base class."""


class DomainError(RBLabError, ValueError):
    """A point lies outside the declared chart domain."""


class DegeneracyError(RBLabError, ValueError):
    """The metric failed the positive-definiteness check at a point."""

    def __init__(self, minor: int, point, value: float):
        self.minor = minor
        self.point = point
        self.value = value
        super().__init__(f"leading principal minor {minor} is {value:.6g} <= 0 at point {list(point)}")


class ParameterError(RBLabError, ValueError):
    """A constructor or run received an out-of-range parameter."""


class ConfigurationError(RBLabError, ValueError):
    """Inputs are incomplete, e.g. an unresolved soliton function."""


class PreconditionError(RBLabError):
    """An identity was requested on data that does not satisfy its hypotheses."""


class CFLError(RBLabError, ValueError):
    """Explicit step larger than the stability bound."""

    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(f"time step {dt:.6g} exceeds the CFL bound {bound:.6g}")


class BlowUpError(RBLabError, FloatingPointError):
    """Non-finite values appeared during time integration."""

    def __init__(self, time: float, step: int, message: str = ""):
        self.time = time
        self.step = step
        super().__init__(message or f"non-finite state at t={time:.6g} (step {step})")
