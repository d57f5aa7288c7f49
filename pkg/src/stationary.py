"""Stationary problem (S): u + (f(u) - φ(u)_x)_x = g with the flux boundary
condition, its resolvent variant u + λ(Φ(u))_x = w, and face-flux regularity.

Solutions are found by pseudo-time marching of w_t + w + λΦ(w)_x = g with the
zeroth-order term taken implicitly, which keeps every iterate monotone in the
previous one and therefore inside [0, u_max].
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError, NoConvergenceError
from .fv_solver import CellField, Grid, Stepper
from .numflux import NumericalFlux, godunov, make_flux
from .problem import ProblemSpec

log = logging.getLogger(__name__)

MAX_ITERATIONS = 10_000_000
CHECK_EVERY = 100


@dataclass(frozen=True, eq=False)
class StationaryProblem:
    spec: ProblemSpec
    g: CellField

    def __post_init__(self):
        values = self.g.values
        if np.any(values < 0.0) or np.any(values > self.spec.u_max):
            raise ConfigError(f"source g leaves [0, {self.spec.u_max}]")

    @property
    def grid(self) -> Grid:
        return self.g.grid

    @classmethod
    def constant(cls, spec: ProblemSpec, grid: Grid, value: float) -> "StationaryProblem":
        return cls(spec, CellField.constant(grid, value))


@dataclass(frozen=True, eq=False)
class FaceFluxProfile:
    """Total flux on faces 1/2 .. I+1/2, plus the solve's final residual."""

    grid: Grid
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0

    @property
    def faces(self) -> np.ndarray:
        return self.grid.faces

    def jumps(self) -> np.ndarray:
        return np.abs(np.diff(self.values))


@dataclass(frozen=True)
class FluxRegularity:
    max_jump: float
    jump_face: int
    left_residual: float
    right_residual: float
    residual: float = 0.0


def _stepper(prob: StationaryProblem, flux: NumericalFlux, lam: float) -> Stepper:
    return Stepper(grid=prob.grid, flux=flux, phi=prob.spec.phi, b=prob.spec.b, scale=lam)


def assemble_residual(
    u: CellField,
    prob: StationaryProblem,
    flux: Optional[NumericalFlux] = None,
    lam: float = 1.0,
) -> CellField:
    """residual_i = u_i + λ(Φ_{i+1/2} - Φ_{i-1/2})/δx - g_i."""
    flux = godunov(prob.spec.f) if flux is None else flux
    div, _ = _stepper(prob, flux, lam).divergence(np.asarray(u.values))
    return CellField(u.grid, u.values + div - prob.g.values)


def _l1(values: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(values)) * dx)


def _pseudo_dt(prob: StationaryProblem, flux: NumericalFlux, lam: float, safety: float) -> float:
    dx = prob.grid.dx
    rate = lam * (flux.cfl_speed / dx + 2.0 * prob.spec.phi.lipschitz / dx ** 2 + prob.spec.b.lipschitz / dx)
    return safety / rate if rate > 0 else 1.0


def solve_stationary(
    prob: StationaryProblem,
    grid: Optional[Grid] = None,
    tol: Optional[float] = None,
    flux: Optional[NumericalFlux] = None,
    lam: float = 1.0,
    max_iterations: int = MAX_ITERATIONS,
    safety: float = 0.9,
) -> Tuple[CellField, FaceFluxProfile]:
    """March to the solution of u + λΦ(u)_x = g.

    Args:
        prob: Problem data; ``prob.g`` fixes the grid.
        grid: Optional grid, must match ``prob.g``.
        tol: Target for the discrete L¹ norm of the residual; defaults to 1e-10·I.
        lam: Flux scaling (1 for (S), λ for the resolvent).

    Raises:
        NoConvergenceError: the residual is still above ``tol`` after
            ``max_iterations`` pseudo-time steps.
    """
    if grid is not None and grid != prob.grid:
        raise ConfigError("grid does not match the source term")
    grid = prob.grid
    tol = 1e-10 * grid.cells if tol is None else tol
    if tol <= 0:
        raise ConfigError("tol must be positive")
    flux = godunov(prob.spec.f) if flux is None else flux
    stepper = _stepper(prob, flux, lam)
    g = np.asarray(prob.g.values)
    dt = _pseudo_dt(prob, flux, lam, safety)
    dx = grid.dx

    w = np.clip(g, 0.0, prob.spec.u_max)
    residual = np.inf
    for iteration in range(max_iterations + 1):
        div, faces = stepper.divergence(w)
        if iteration % CHECK_EVERY == 0:
            residual = _l1(w + div - g, dx)
            if residual < tol:
                log.debug("stationary solve converged in %d iterations (residual %.3e)", iteration, residual)
                return CellField(grid, w), FaceFluxProfile(grid, faces, residual, iteration)
            if not np.isfinite(residual):
                break
        w = (w - dt * div + dt * g) / (1.0 + dt)
    raise NoConvergenceError("stationary solve did not converge", residual, max_iterations)


def flux_regularity_report(profile: FaceFluxProfile, u: CellField, prob: StationaryProblem) -> FluxRegularity:
    """Adjacent-face jumps and boundary-condition residuals of a converged profile."""
    jumps = profile.jumps()
    k = int(np.argmax(jumps)) if jumps.size else 0
    b_first, b_last = prob.spec.b.rule(np.asarray(u.values)[[0, -1]])
    return FluxRegularity(
        max_jump=float(jumps[k]) if jumps.size else 0.0,
        jump_face=k + 1,
        left_residual=abs(float(profile.values[0]) + float(b_first)),
        right_residual=abs(float(profile.values[-1]) - float(b_last)),
        residual=profile.residual,
    )


def jump_refinement_ratio(
    spec: ProblemSpec,
    grid: Grid,
    g_value: float,
    tol: Optional[float] = None,
    flux_name: str = "godunov",
) -> Tuple[float, FluxRegularity, FluxRegularity]:
    """Max face-flux jump on the refined grid divided by the jump on ``grid``."""
    flux = make_flux(flux_name, spec.f, spec.u_max)
    reports = []
    for level in (grid, grid.refine()):
        prob = StationaryProblem.constant(spec, level, g_value)
        u, profile = solve_stationary(prob, tol=tol, flux=flux)
        reports.append(flux_regularity_report(profile, u, prob))
    coarse, fine = reports
    return refinement_ratio(coarse, fine), coarse, fine


def refinement_ratio(coarse: FluxRegularity, fine: FluxRegularity) -> float:
    """fine.max_jump / coarse.max_jump; 0 when the coarse profile has no jump."""
    return fine.max_jump / coarse.max_jump if coarse.max_jump > 0 else 0.0


def mass_defect(u: CellField, prob: StationaryProblem, lam: float = 1.0) -> float:
    """|Σ(u_i - g_i)δx + λ(b(u_1) + b(u_I))|, zero at an exact solution.

    Summing the cell equations telescopes the interior fluxes, leaving the
    mass lost through the two boundary faces.
    """
    values = np.asarray(u.values)
    b_first, b_last = prob.spec.b.rule(values[[0, -1]])
    balance = np.sum(values - prob.g.values) * u.grid.dx + lam * (float(b_first) + float(b_last))
    return abs(float(balance))


def resolvent(
    lam: float,
    w: CellField,
    spec: ProblemSpec,
    grid: Optional[Grid] = None,
    tol: Optional[float] = None,
    flux: Optional[NumericalFlux] = None,
) -> CellField:
    """u = (I + λA)⁻¹ w, i.e. the solution of u + λΦ(u)_x = w."""
    if lam < 0:
        raise ConfigError("λ must be non-negative")
    if lam == 0:
        return CellField(w.grid, w.values)
    u, _ = solve_stationary(StationaryProblem(spec, w), grid=grid, tol=tol, flux=flux, lam=lam)
    return u
