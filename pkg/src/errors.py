"""Exception hierarchy for degenfv."""

from typing import Optional


class DegenFVError(Exception):
    """Base class for all solver, checker and configuration errors."""


class ConfigError(DegenFVError):
    """Invalid manifest, grid or scheme parameters."""


class InconsistentBoundaryError(DegenFVError):
    """b takes different values where φ takes equal values, so no β exists."""


class SpeedTooSmallError(DegenFVError):
    """Rusanov dissipation speed below the Lipschitz constant of f."""


class InitOutOfRangeError(DegenFVError):
    """An initial cell average lies outside [0, u_max]."""


class NonFiniteStateError(DegenFVError):
    """A time step produced NaN or inf values."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class NoBetaError(DegenFVError):
    """The viscous run needs b = β∘φ but β cannot be reconstructed."""


class NoConvergenceError(DegenFVError):
    """Pseudo-time marching did not reach the residual tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message}: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class FluxMismatchError(DegenFVError):
    """A record was produced with a different numerical flux."""


class ConfigMismatchError(DegenFVError):
    """Two records were produced on different grids or schemes."""
