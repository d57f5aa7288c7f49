"""Built-in function library: the fluxes, diffusions and boundary functions
used by the presets and by custom problems in manifest files."""

from typing import Optional

import numpy as np

from .errors import ConfigError
from .problem import BoundarySpec, ScalarFn


def burgers(u_max: float = 1.0) -> ScalarFn:
    """f(u) = u²/2."""
    return ScalarFn(
        rule=lambda s: 0.5 * s * s,
        lipschitz=float(u_max),
        name="u^2/2",
        critical_points=(0.0,),
        derivative=lambda s: s,
    )


def lwr() -> ScalarFn:
    """f(u) = u(1-u) on [0, 1], zero outside."""

    def rule(s):
        return np.where((s >= 0.0) & (s <= 1.0), s * (1.0 - s), 0.0)

    def derivative(s):
        return np.where((s >= 0.0) & (s <= 1.0), 1.0 - 2.0 * s, 0.0)

    return ScalarFn(
        rule=rule,
        lipschitz=1.0,
        name="u(1-u)1_[0,1]",
        critical_points=(0.0, 0.5, 1.0),
        derivative=derivative,
    )


def linear(slope: float, offset: float = 0.0) -> ScalarFn:
    """f(u) = slope·u + offset."""
    return ScalarFn(
        rule=lambda s: slope * s + offset,
        lipschitz=abs(float(slope)),
        name=f"{slope:g}u+{offset:g}" if offset else f"{slope:g}u",
        critical_points=(),
        derivative=lambda s: np.full_like(s, slope, dtype=float),
    )


def zero() -> ScalarFn:
    return ScalarFn(
        rule=lambda s: np.zeros_like(s, dtype=float),
        lipschitz=0.0,
        name="0",
        critical_points=(),
        derivative=lambda s: np.zeros_like(s, dtype=float),
    )


def identity() -> ScalarFn:
    return ScalarFn(
        rule=lambda s: np.array(s, dtype=float),
        lipschitz=1.0,
        name="u",
        critical_points=(),
        derivative=lambda s: np.ones_like(s, dtype=float),
    )


def threshold_diffusion(u_c: float) -> ScalarFn:
    """φ(u) = (u - u_c)⁺."""
    return ScalarFn(
        rule=lambda s: np.maximum(s - u_c, 0.0),
        lipschitz=1.0,
        name=f"(u-{u_c:g})+",
        critical_points=(float(u_c),),
        derivative=lambda s: np.where(s > u_c, 1.0, 0.0),
    )


def scaled(g: ScalarFn, c: float) -> ScalarFn:
    crit = g.critical_points
    return ScalarFn(
        rule=lambda s: c * g.rule(s),
        lipschitz=abs(c) * g.lipschitz,
        name=f"{c:g}*{g.name}",
        critical_points=crit,
        derivative=None if g.derivative is None else (lambda s: c * g.derivative(s)),
    )


def viscous(phi: ScalarFn, epsilon: float) -> ScalarFn:
    """φ_ε = φ + ε·Id."""
    if epsilon == 0.0:
        return phi
    return ScalarFn(
        rule=lambda s: phi.rule(s) + epsilon * s,
        lipschitz=phi.lipschitz + epsilon,
        name=f"{phi.name}+{epsilon:g}u",
        critical_points=phi.critical_points,
    )


def compose(beta: ScalarFn, phi: ScalarFn) -> ScalarFn:
    """β∘φ."""
    return ScalarFn(
        rule=lambda s: np.asarray(beta.rule(np.asarray(phi.rule(s), dtype=float)), dtype=float),
        lipschitz=beta.lipschitz * phi.lipschitz,
        name=f"β∘{phi.name}",
        critical_points=phi.critical_points,
    )


FLUX_FUNCTIONS = {
    "burgers": burgers,
    "lwr": lambda u_max=1.0: lwr(),
    "zero": lambda u_max=1.0: zero(),
}

BOUNDARY_KINDS = ("zero", "phi", "scaled-phi", "identity")


def flux_function(name: str, u_max: float = 1.0) -> ScalarFn:
    try:
        return FLUX_FUNCTIONS[name](u_max)
    except KeyError:
        raise ConfigError(f"unknown flux function '{name}' (choose from {', '.join(FLUX_FUNCTIONS)})")


def boundary(kind: str, phi: ScalarFn, scale: Optional[float] = None) -> BoundarySpec:
    """Boundary function b from the built-in family {0, φ, c·φ, identity}."""
    if kind == "zero":
        return BoundarySpec(b=zero(), beta=zero())
    if kind == "phi":
        return BoundarySpec(b=phi, beta=identity())
    if kind == "scaled-phi":
        c = 2.0 if scale is None else float(scale)
        if c < 0:
            raise ConfigError("boundary_scale must be non-negative")
        return BoundarySpec(b=scaled(phi, c), beta=scaled(identity(), c))
    if kind == "identity":
        return BoundarySpec(b=identity())
    raise ConfigError(f"unknown boundary kind '{kind}' (choose from {', '.join(BOUNDARY_KINDS)})")
