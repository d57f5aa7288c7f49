"""degenfv - finite-volume solver for degenerate parabolic-hyperbolic problems with flux boundary conditions."""

__version__ = "0.1.0"
