"""Monotone two-point numerical fluxes and the associated numerical entropy flux.

All fluxes evaluate elementwise on numpy arrays, so a solver can evaluate
every interface of a grid in one call.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .errors import ConfigError, SpeedTooSmallError
from .problem import ScalarFn, lipschitz_estimate

log = logging.getLogger(__name__)

FluxRule = Callable[[np.ndarray, np.ndarray], np.ndarray]

GODUNOV_SAMPLES = 2048
RUSANOV_MARGIN = 1.05
FLUX_NAMES = ("godunov", "rusanov", "engquist-osher")


@dataclass(frozen=True)
class NumericalFlux:
    """A monotone, consistent two-point flux F(u, v).

    ``cfl_speed`` is the bound on ∂F/∂u - ∂F/∂v that enters the time-step
    restriction; for Godunov and Engquist-Osher it is L_f, for Rusanov it is
    the dissipation speed.
    """

    name: str
    rule: FluxRule
    lipschitz_u: float
    lipschitz_v: float
    f: ScalarFn
    cfl_speed: float

    def __call__(self, u, v):
        u_arr = np.asarray(u, dtype=float)
        v_arr = np.asarray(v, dtype=float)
        out = self.rule(*np.broadcast_arrays(u_arr, v_arr))
        if u_arr.ndim == 0 and v_arr.ndim == 0:
            return float(out)
        return np.asarray(out, dtype=float)


def _godunov_exact(f: ScalarFn, critical: Iterable[float]) -> FluxRule:
    critical = tuple(float(c) for c in critical)

    def rule(u, v):
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        fu, fv = f.rule(u), f.rule(v)
        smallest = np.minimum(fu, fv)
        largest = np.maximum(fu, fv)
        for c in critical:
            inside = (lo <= c) & (c <= hi)
            fc = float(f.rule(np.asarray(c)))
            smallest = np.where(inside, np.minimum(smallest, fc), smallest)
            largest = np.where(inside, np.maximum(largest, fc), largest)
        return np.where(u <= v, smallest, largest)

    return rule


def _refined_extremum(f: ScalarFn, lo: float, hi: float, sign: float, n_samples: int) -> float:
    """sign * extremum of sign * f over [lo, hi]: dense sampling, then bounded refinement."""
    if hi <= lo:
        return float(f.rule(np.asarray(lo)))
    s = np.linspace(lo, hi, n_samples)
    values = sign * f.rule(s)
    k = int(np.argmin(values))
    best = float(values[k])
    bracket = (s[max(k - 1, 0)], s[min(k + 1, n_samples - 1)])
    if bracket[1] > bracket[0]:
        res = minimize_scalar(
            lambda x: sign * float(f.rule(np.asarray(x))),
            bounds=bracket,
            method="bounded",
            options={"xatol": 1e-14},
        )
        best = min(best, float(res.fun))
    return sign * best


def _godunov_sampled(f: ScalarFn, n_samples: int) -> FluxRule:
    def pointwise(u, v):
        if u <= v:
            return _refined_extremum(f, u, v, 1.0, n_samples)
        return _refined_extremum(f, v, u, -1.0, n_samples)

    vectorised = np.vectorize(pointwise, otypes=[float])
    return lambda u, v: vectorised(u, v)


def godunov(f: ScalarFn, n_samples: int = GODUNOV_SAMPLES) -> NumericalFlux:
    """F(u,v) = min of f over [u,v] if u <= v, max over [v,u] otherwise.

    Functions that declare their critical points get the exact candidate
    evaluation; others are sampled densely and refined.
    """
    if f.critical_points is not None:
        rule = _godunov_exact(f, f.critical_points)
    else:
        rule = _godunov_sampled(f, max(n_samples, GODUNOV_SAMPLES))
    return NumericalFlux(
        name="godunov",
        rule=rule,
        lipschitz_u=f.lipschitz,
        lipschitz_v=f.lipschitz,
        f=f,
        cfl_speed=f.lipschitz,
    )


def rusanov(f: ScalarFn, speed: Optional[float] = None, u_max: float = 1.0) -> NumericalFlux:
    """F(u,v) = (f(u)+f(v))/2 - (L/2)(v-u).

    Raises:
        SpeedTooSmallError: ``speed`` is below the estimated Lipschitz constant.
    """
    estimated = lipschitz_estimate(f, (0.0, u_max))
    if speed is None:
        speed = RUSANOV_MARGIN * max(estimated, f.lipschitz)
    if speed < estimated:
        raise SpeedTooSmallError(
            f"Rusanov speed {speed:.6g} is below the Lipschitz constant {estimated:.6g} of {f.name}"
        )
    half = 0.5 * speed

    def rule(u, v):
        return 0.5 * (f.rule(u) + f.rule(v)) - half * (v - u)

    lipschitz = 0.5 * (f.lipschitz + speed)
    return NumericalFlux(
        name="rusanov",
        rule=rule,
        lipschitz_u=lipschitz,
        lipschitz_v=lipschitz,
        f=f,
        cfl_speed=float(speed),
    )


def _variation(f: ScalarFn, x: np.ndarray, critical: Iterable[float], positive: bool) -> np.ndarray:
    """∫_0^x max(f',0) (positive) or ∫_0^x min(f',0), exact for piecewise-monotone f."""
    clip = (lambda d: np.maximum(d, 0.0)) if positive else (lambda d: np.minimum(d, 0.0))
    critical = sorted(set(float(c) for c in critical))
    out = np.zeros_like(x, dtype=float)

    lo = 0.0
    f_lo = float(f.rule(np.asarray(lo)))
    for hi in [c for c in critical if c > 0.0] + [np.inf]:
        top = np.clip(x, lo, hi)
        out += clip(f.rule(top) - f_lo)
        if np.isfinite(hi):
            lo, f_lo = hi, float(f.rule(np.asarray(hi)))

    hi = 0.0
    f_hi = float(f.rule(np.asarray(hi)))
    for lo in [c for c in reversed(critical) if c < 0.0] + [-np.inf]:
        bottom = np.clip(x, lo, hi)
        out -= clip(f_hi - f.rule(bottom))
        if np.isfinite(lo):
            hi, f_hi = lo, float(f.rule(np.asarray(lo)))
    return out


def _numeric_derivative(f: ScalarFn) -> Callable[[float], float]:
    if f.derivative is not None:
        return lambda s: float(f.derivative(np.asarray(s, dtype=float)))
    h = 1e-7
    return lambda s: float((f.rule(np.asarray(s + h)) - f.rule(np.asarray(s - h))) / (2.0 * h))


def _quadrature_variation(f: ScalarFn, positive: bool) -> Callable[[float], float]:
    dfdx = _numeric_derivative(f)
    part = (lambda s: max(dfdx(s), 0.0)) if positive else (lambda s: min(dfdx(s), 0.0))

    def integral(x: float) -> float:
        if x == 0.0:
            return 0.0
        value, _ = quad(part, 0.0, x, epsabs=1e-10, epsrel=1e-12, limit=200)
        return value

    return integral


def engquist_osher(f: ScalarFn) -> NumericalFlux:
    """F(u,v) = f(0) + ∫_0^u max(f',0) + ∫_0^v min(f',0)."""
    f0 = float(f.rule(np.asarray(0.0)))
    if f.critical_points is not None:
        crit = f.critical_points

        def rule(u, v):
            return f0 + _variation(f, u, crit, True) + _variation(f, v, crit, False)

    else:
        up = np.vectorize(_quadrature_variation(f, True), otypes=[float])
        down = np.vectorize(_quadrature_variation(f, False), otypes=[float])

        def rule(u, v):
            return f0 + up(u) + down(v)

    return NumericalFlux(
        name="engquist-osher",
        rule=rule,
        lipschitz_u=f.lipschitz,
        lipschitz_v=f.lipschitz,
        f=f,
        cfl_speed=f.lipschitz,
    )


def entropy_flux(flux: NumericalFlux, k: float) -> FluxRule:
    """Numerical Kruzhkov entropy flux G(u,v) = F(u∨k, v∨k) - F(u∧k, v∧k)."""

    def rule(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return flux(np.maximum(u, k), np.maximum(v, k)) - flux(np.minimum(u, k), np.minimum(v, k))

    return rule


def make_flux(name: str, f: ScalarFn, u_max: float = 1.0, speed: Optional[float] = None) -> NumericalFlux:
    """Select a flux constructor by its configuration name."""
    if name == "godunov":
        return godunov(f)
    if name == "rusanov":
        return rusanov(f, speed=speed, u_max=u_max)
    if name in ("engquist-osher", "eo"):
        return engquist_osher(f)
    raise ConfigError(f"unknown numerical flux '{name}' (choose from {', '.join(FLUX_NAMES)})")
