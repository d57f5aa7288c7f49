"""Explicit monotone finite-volume scheme with nonlinear flux boundary conditions.

Cells are numbered 1..I in the docs and 0..I-1 in arrays. Face fluxes Φ are
the total flux f(u) - φ(u)_x, signed in the +x direction; the boundary faces
carry Φ_{1/2} = -b(u_1) and Φ_{I+1/2} = +b(u_I), so mass leaves through both
ends when b > 0.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InitOutOfRangeError, NonFiniteStateError
from .library import compose, viscous
from .numflux import NumericalFlux
from .problem import ProblemSpec, ScalarFn, reconstruct_beta

log = logging.getLogger(__name__)

RANGE_SLACK = 1e-12
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of I cells on [a, b_end]."""

    a: float
    b_end: float
    cells: int

    def __post_init__(self):
        if self.cells < 3:
            raise ConfigError(f"a grid needs at least 3 cells, got {self.cells}")
        if not self.b_end > self.a:
            raise ConfigError(f"empty interval [{self.a}, {self.b_end}]")

    @classmethod
    def from_dx(cls, a: float, b_end: float, dx: float) -> "Grid":
        if dx <= 0:
            raise ConfigError("dx must be positive")
        return cls(a=a, b_end=b_end, cells=int(round((b_end - a) / dx)))

    @property
    def dx(self) -> float:
        return (self.b_end - self.a) / self.cells

    @property
    def faces(self) -> np.ndarray:
        return self.a + (self.b_end - self.a) * np.arange(self.cells + 1) / self.cells

    @property
    def centers(self) -> np.ndarray:
        faces = self.faces
        return 0.5 * (faces[:-1] + faces[1:])

    def refine(self) -> "Grid":
        return Grid(self.a, self.b_end, 2 * self.cells)


@dataclass(frozen=True, eq=False)
class CellField:
    """Cell averages on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.cells,):
            raise ConfigError(f"expected {self.grid.cells} cell values, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "CellField":
        return cls(grid, np.full(grid.cells, float(c)))

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def l1_distance(self, other: "CellField") -> float:
        if other.grid != self.grid:
            raise ConfigError("fields live on different grids")
        return float(np.sum(np.abs(self.values - other.values)) * self.grid.dx)

    def coarsen(self) -> "CellField":
        """Average pairs of cells onto the grid with half as many cells."""
        if self.grid.cells % 2:
            raise ConfigError("cannot coarsen an odd number of cells")
        coarse = Grid(self.grid.a, self.grid.b_end, self.grid.cells // 2)
        return CellField(coarse, 0.5 * (self.values[0::2] + self.values[1::2]))


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    ``dt=None`` selects the CFL-derived step from compute_dt.
    """

    flux: NumericalFlux
    dt: Optional[float] = None
    cfl_safety: float = 0.9
    epsilon: float = 0.0
    snapshot_times: Tuple[float, ...] = ()
    snapshot_every: int = 0
    paper_literal_left_boundary: bool = False

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ConfigError("cfl_safety must lie in (0, 1]")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be non-negative")


@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    step: int
    field: CellField


@dataclass(eq=False)
class SolutionRecord:
    """Append-only record of a run.

    Per-step lists are indexed by step number minus one; entry n describes the
    step from state n to state n+1. ``left_flux``/``right_flux`` are the signed
    boundary face fluxes Φ_{1/2} and Φ_{I+1/2} used in that step.
    """

    grid: Grid
    flux_name: str
    dt: float
    epsilon: float
    paper_literal_left_boundary: bool = False
    with_source: bool = False
    initial_mass: float = 0.0
    snapshots: List[Snapshot] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    step_dts: List[float] = field(default_factory=list)
    masses: List[float] = field(default_factory=list)
    left_flux: List[float] = field(default_factory=list)
    right_flux: List[float] = field(default_factory=list)
    source_mass: List[float] = field(default_factory=list)
    minima: List[Tuple[float, int]] = field(default_factory=list)
    maxima: List[Tuple[float, int]] = field(default_factory=list)

    def add_snapshot(self, time: float, step: int, values: np.ndarray) -> None:
        if self.snapshots and time < self.snapshots[-1].time:
            raise ValueError("snapshot times must be non-decreasing")
        if self.snapshots and self.snapshots[-1].step == step:
            return
        self.snapshots.append(Snapshot(time, step, CellField(self.grid, values)))

    def add_extrema(self, values: np.ndarray) -> None:
        lo, hi = int(np.argmin(values)), int(np.argmax(values))
        self.minima.append((float(values[lo]), lo))
        self.maxima.append((float(values[hi]), hi))

    def add_step(self, time, dt, mass, left, right, source) -> None:
        self.times.append(time)
        self.step_dts.append(dt)
        self.masses.append(mass)
        self.left_flux.append(left)
        self.right_flux.append(right)
        self.source_mass.append(source)

    @property
    def steps(self) -> int:
        return len(self.times)

    @property
    def initial(self) -> CellField:
        return self.snapshots[0].field

    @property
    def final(self) -> CellField:
        return self.snapshots[-1].field

    @property
    def snapshot_times(self) -> List[float]:
        return [s.time for s in self.snapshots]

    def snapshot_at(self, time: float) -> CellField:
        for snap in self.snapshots:
            if math.isclose(snap.time, time, rel_tol=0.0, abs_tol=1e-12):
                return snap.field
        raise KeyError(f"no snapshot at t = {time}")


def init_cells(spec: ProblemSpec, grid: Grid) -> CellField:
    """Cell averages of u0: exact for piecewise-constant data, 16-point Gauss otherwise.

    Raises:
        InitOutOfRangeError: an average falls outside [0, u_max].
    """
    faces = grid.faces
    lo, hi = faces[:-1], faces[1:]
    if hasattr(spec.u0, "integrate"):
        averages = np.asarray(spec.u0.integrate(lo, hi), dtype=float) / (hi - lo)
    else:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[:, None] + half[:, None] * _GAUSS_NODES[None, :]
        values = np.asarray(spec.u0(nodes), dtype=float)
        averages = 0.5 * values @ _GAUSS_WEIGHTS
    bad = np.flatnonzero((averages < -RANGE_SLACK) | (averages > spec.u_max + RANGE_SLACK))
    if bad.size:
        i = int(bad[0])
        raise InitOutOfRangeError(f"initial average {averages[i]:.6g} in cell {i + 1} is outside [0, {spec.u_max}]")
    return CellField(grid, averages)


def compute_dt(spec: ProblemSpec, grid: Grid, config: SchemeConfig) -> float:
    """Largest step keeping the explicit scheme monotone, times cfl_safety.

    δt = safety·δx² / (L·δx + 2(L_φ + ε)) with L the flux's CFL speed. The
    boundary cells see one diffusive face and the boundary flux instead, so
    the bound also covers (L + L_b)·δx + L_φ + ε with L_b the Lipschitz
    constant of b.
    """
    dx = grid.dx
    speed = config.flux.cfl_speed
    diffusion = spec.phi.lipschitz + config.epsilon
    interior = speed * dx + 2.0 * diffusion
    boundary = (speed + spec.b.lipschitz) * dx + diffusion
    if boundary > interior:
        log.warning("the boundary flux limits the time step (L_b = %.4g)", spec.b.lipschitz)
    denominator = max(interior, boundary)
    if denominator <= 0:
        raise ConfigError("no convection and no diffusion: the CFL bound is infinite, set dt explicitly")
    return config.cfl_safety * dx * dx / denominator


def resolve_dt(spec: ProblemSpec, grid: Grid, config: SchemeConfig) -> float:
    if config.dt is None:
        return compute_dt(spec, grid, config)
    bound = compute_dt(spec, grid, SchemeConfig(flux=config.flux, cfl_safety=1.0, epsilon=config.epsilon))
    if config.dt > bound * (1.0 + 1e-12):
        log.warning("dt = %.4g exceeds the monotonicity bound %.4g; the scheme may not be monotone", config.dt, bound)
    return config.dt


class Stepper:
    """One explicit update of the scheme with fixed φ, b and flux."""

    def __init__(
        self,
        grid: Grid,
        flux: NumericalFlux,
        phi: ScalarFn,
        b: ScalarFn,
        paper_literal_left_boundary: bool = False,
        source: Optional[np.ndarray] = None,
        scale: float = 1.0,
    ):
        self.grid = grid
        self.dx = grid.dx
        self.flux = flux
        self.phi = phi
        self.b = b
        self.left_sign = 1.0 if paper_literal_left_boundary else -1.0
        self.source = None if source is None else np.asarray(source, dtype=float)
        self.scale = scale

    def face_fluxes(self, u: np.ndarray) -> np.ndarray:
        """Total flux Φ on all I+1 faces."""
        phi_u = self.phi.rule(u)
        out = np.empty(u.size + 1)
        out[1:-1] = self.flux.rule(u[:-1], u[1:]) - (phi_u[1:] - phi_u[:-1]) / self.dx
        b_left, b_right = self.b.rule(u[[0, -1]])
        out[0] = self.left_sign * b_left
        out[-1] = b_right
        return out

    def divergence(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        phi_faces = self.face_fluxes(u)
        return self.scale * (phi_faces[1:] - phi_faces[:-1]) / self.dx, phi_faces

    def advance(self, u: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray, float]:
        """Return (u_new, face fluxes, source mass added)."""
        div, faces = self.divergence(u)
        new = u - dt * div
        added = 0.0
        if self.source is not None:
            sink = self.source - u
            new = new + dt * sink
            added = float(dt * np.sum(sink) * self.dx)
        return new, faces, added


def _stepper_for(spec: ProblemSpec, grid: Grid, config: SchemeConfig, b: Optional[ScalarFn] = None, source=None) -> Stepper:
    return Stepper(
        grid=grid,
        flux=config.flux,
        phi=viscous(spec.phi, config.epsilon),
        b=spec.b if b is None else b,
        paper_literal_left_boundary=config.paper_literal_left_boundary,
        source=source,
    )


def step(state: CellField, spec: ProblemSpec, config: SchemeConfig, dt: Optional[float] = None) -> CellField:
    """Advance one step; φ is replaced by φ_ε when ε > 0.

    Raises:
        NonFiniteStateError: the update produced NaN or inf.
    """
    dt = resolve_dt(spec, state.grid, config) if dt is None else dt
    new, _, _ = _stepper_for(spec, state.grid, config).advance(np.asarray(state.values), dt)
    if not np.all(np.isfinite(new)):
        raise NonFiniteStateError("non-finite value after step; check the CFL condition")
    return CellField(state.grid, new)


def _targets(spec: ProblemSpec, config: SchemeConfig) -> List[float]:
    horizon = spec.horizon
    for t in config.snapshot_times:
        if t < 0 or t > horizon + 1e-12:
            raise ConfigError(f"snapshot time {t} outside [0, {horizon}]")
    return sorted(set(min(float(t), horizon) for t in config.snapshot_times) | {horizon})


def _march(
    stepper: Stepper,
    u: np.ndarray,
    spec: ProblemSpec,
    config: SchemeConfig,
    dt: float,
    record: SolutionRecord,
) -> SolutionRecord:
    record.initial_mass = float(np.sum(u) * stepper.dx)
    record.add_snapshot(0.0, 0, u)
    record.add_extrema(u)
    t, n = 0.0, 0
    for target in _targets(spec, config):
        while True:
            remaining = target - t
            if remaining <= dt * 1e-9:
                t = target
                break
            h = dt if remaining > dt * (1.0 + 1e-9) else remaining
            u, faces, added = stepper.advance(u, h)
            n += 1
            t = target if h == remaining else t + h
            if not np.all(np.isfinite(u)):
                raise NonFiniteStateError("non-finite value; check the CFL condition", step=n)
            record.add_step(t, h, float(np.sum(u) * stepper.dx), float(faces[0]), float(faces[-1]), added)
            record.add_extrema(u)
            if config.snapshot_every and n % config.snapshot_every == 0:
                record.add_snapshot(t, n, u)
        record.add_snapshot(t, n, u)
    log.debug("advanced %d steps to t = %.6g", n, t)
    return record


def run(
    spec: ProblemSpec,
    grid: Grid,
    config: SchemeConfig,
    initial: Optional[CellField] = None,
    source: Optional[CellField] = None,
) -> SolutionRecord:
    """Advance from init_cells (or ``initial``) to the horizon with a constant δt.

    The last step before each snapshot time and before T is shortened to land
    on it exactly. With ``source`` given, the zeroth-order term g - u is added,
    so the stationary states of the run solve (S).
    """
    return _run_with(spec, grid, config, None, initial, source)


def viscous_run(
    spec: ProblemSpec,
    grid: Grid,
    config: SchemeConfig,
    initial: Optional[CellField] = None,
) -> SolutionRecord:
    """Run with φ_ε = φ + ε·Id and b_ε = β∘φ_ε.

    Raises:
        NoBetaError: b does not factor through φ.
    """
    if config.epsilon == 0.0:
        return run(spec, grid, config, initial=initial)
    beta = reconstruct_beta(spec)
    b_eps = compose(beta, viscous(spec.phi, config.epsilon))
    return _run_with(spec, grid, config, b_eps, initial, None)


def _run_with(spec, grid, config, b, initial, source) -> SolutionRecord:
    dt = resolve_dt(spec, grid, config)
    u = init_cells(spec, grid) if initial is None else initial
    if u.grid != grid:
        raise ConfigError("initial field lives on a different grid")
    g = None
    if source is not None:
        if source.grid != grid:
            raise ConfigError("source lives on a different grid")
        g = source.values
    stepper = _stepper_for(spec, grid, config, b=b, source=g)
    record = SolutionRecord(
        grid=grid,
        flux_name=config.flux.name,
        dt=dt,
        epsilon=config.epsilon,
        paper_literal_left_boundary=config.paper_literal_left_boundary,
        with_source=g is not None,
    )
    return _march(stepper, np.array(u.values), spec, config, dt, record)


def run_many(
    spec: ProblemSpec,
    grid: Grid,
    config: SchemeConfig,
    initials: Sequence[CellField],
) -> List[SolutionRecord]:
    """Independent runs that differ only in their initial data."""
    return [run(spec, grid, config, initial=u0) for u0 in initials]
