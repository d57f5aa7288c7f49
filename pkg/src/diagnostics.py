"""Executable checks on solution records: maximum principle, discrete entropy
inequalities, mass balance, L¹ contraction, the integral-solution inequality,
viscous energy estimates and a boundary-layer indicator.

Every check is a pure function of its inputs and returns a CheckResult; a
DiagnosticsReport collects them for export.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError, ConfigMismatchError, FluxMismatchError
from .fv_solver import CellField, SolutionRecord
from .library import viscous
from .numflux import NumericalFlux, entropy_flux, godunov
from .problem import ProblemSpec, reconstruct_beta
from .stationary import StationaryProblem, assemble_residual

log = logging.getLogger(__name__)

RANGE_TOL = 1e-12
ENTROPY_TOL = 1e-12
# Residuals of the stationary inequality carry a 1/δx² factor.
STATIONARY_ENTROPY_TOL = 1e-10
CONTRACTION_TOL = 1e-12
EQUALITY_TOL = 1e-12
LAYER_THRESHOLD = 5.0
GROWTH_LIMIT = 2.0


@dataclass(frozen=True)
class CheckResult:
    """One named check.

    ``expected_fail`` inverts the pass criterion: the check reproduces its
    target exactly when it fails. A target that is not reproduced is reported
    but does not make the report fail. Informational checks are never asserted.
    """

    name: str
    passed: bool
    magnitude: float
    tolerance: float
    witness_step: Optional[int] = None
    witness_cell: Optional[int] = None
    asserted: bool = True
    expected_fail: bool = False
    detail: str = ""

    @property
    def acceptable(self) -> bool:
        if not self.asserted or self.expected_fail:
            return True
        return self.passed

    @property
    def reproduced(self) -> bool:
        """For expected-fail checks: whether the failure actually showed up."""
        return self.expected_fail and not self.passed


@dataclass
class DiagnosticsReport:
    checks: List[CheckResult] = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def __getitem__(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.acceptable]

    @property
    def ok(self) -> bool:
        return not self.failures()


def max_principle_scan(rec: SolutionRecord, u_max: float) -> CheckResult:
    """Global extrema over every step and the first (step, cell) leaving [0, u_max]."""
    if not rec.minima:
        raise ConfigError("empty record")
    lows = np.array([m[0] for m in rec.minima])
    highs = np.array([m[0] for m in rec.maxima])
    bad = np.flatnonzero((lows < -RANGE_TOL) | (highs > u_max + RANGE_TOL))
    witness_step = witness_cell = None
    if bad.size:
        n = int(bad[0])
        witness_step = n
        cell = rec.minima[n][1] if lows[n] < -RANGE_TOL else rec.maxima[n][1]
        witness_cell = cell + 1
    low, high = float(lows.min()), float(highs.max())
    return CheckResult(
        name="max_principle",
        passed=not bad.size,
        magnitude=max(high - u_max, -low, 0.0),
        tolerance=RANGE_TOL,
        witness_step=witness_step,
        witness_cell=witness_cell,
        detail=f"min={low:.6g} max={high:.6g}",
    )


def mass_balance_check(rec: SolutionRecord, tol_per_cell: float = 1e-13) -> CheckResult:
    """|m^{n+1} - m^n + δt(Φ_{I+1/2} - Φ_{1/2}) - source| at every step."""
    tol = tol_per_cell * rec.grid.cells
    if not rec.steps:
        return CheckResult("mass_balance", True, 0.0, tol)
    masses = np.concatenate([[rec.initial_mass], rec.masses])
    dts = np.asarray(rec.step_dts)
    outflow = dts * (np.asarray(rec.right_flux) - np.asarray(rec.left_flux))
    errors = np.abs(np.diff(masses) + outflow - np.asarray(rec.source_mass))
    n = int(np.argmax(errors))
    worst = float(errors[n])
    return CheckResult(
        name="mass_balance",
        passed=worst <= tol,
        magnitude=worst,
        tolerance=tol,
        witness_step=n + 1 if worst > tol else None,
    )


def _consecutive_pairs(rec: SolutionRecord):
    for first, second in zip(rec.snapshots, rec.snapshots[1:]):
        if second.step == first.step + 1:
            yield first, second


def _diffusion_for(rec: SolutionRecord, spec: ProblemSpec):
    return viscous(spec.phi, rec.epsilon)


def entropy_residual(
    rec: SolutionRecord,
    spec: ProblemSpec,
    flux: NumericalFlux,
    k_grid: Sequence[float],
) -> Dict[str, CheckResult]:
    """Discrete Kruzhkov cell-entropy residuals between consecutive steps.

    Interior cells must satisfy
    |u_i^{n+1}-k| - |u_i^n-k| + λ[G_{i+1/2} - G_{i-1/2} - (Θ_{i+1} - 2Θ_i + Θ_{i-1})/δx] <= 0
    with Θ_i = |φ(u_i) - φ(k)|. The two boundary cells get the same residual
    with the boundary entropy flux ±|b(u) - b(k)| and the allowance
    |f(k)·η - b(k)| subtracted; that result is informational.

    Only snapshot pairs exactly one step apart enter; record with
    ``snapshot_every=1`` to cover the whole run.

    Raises:
        FluxMismatchError: ``rec`` was produced with a different flux.
    """
    if rec.flux_name != flux.name:
        raise FluxMismatchError(f"record uses '{rec.flux_name}', got '{flux.name}'")
    for k in k_grid:
        if k < 0 or k > spec.u_max:
            raise ConfigError(f"k = {k} outside [0, {spec.u_max}]")
    phi = _diffusion_for(rec, spec)
    b = spec.b
    dx = rec.grid.dx
    left_normal, right_normal = spec.boundary.normals
    entropy_fluxes = [(float(k), entropy_flux(flux, k)) for k in k_grid]

    worst_interior = (-np.inf, None, None)
    worst_boundary = (-np.inf, None, None)
    pairs = 0
    for first, second in _consecutive_pairs(rec):
        pairs += 1
        u = np.asarray(first.field.values)
        v = np.asarray(second.field.values)
        lam = (second.time - first.time) / dx
        phi_u = phi.rule(u)
        b_u = b.rule(u[[0, -1]])
        for k, G in entropy_fluxes:
            phi_k = float(phi.rule(np.asarray(k)))
            f_k = float(flux.f.rule(np.asarray(k)))
            b_k = float(b.rule(np.asarray(k)))
            theta = np.abs(phi_u - phi_k)
            g_faces = G(u[:-1], u[1:])
            change = np.abs(v - k) - np.abs(u - k)

            interior = change[1:-1] + lam * (
                g_faces[1:] - g_faces[:-1] - (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / dx
            )
            i = int(np.argmax(interior))
            if interior[i] > worst_interior[0]:
                worst_interior = (float(interior[i]), second.step, i + 2)

            left_flux = -abs(b_u[0] - b_k)
            right_flux = abs(b_u[1] - b_k)
            left = change[0] + lam * (g_faces[0] - left_flux - (theta[1] - theta[0]) / dx)
            left -= lam * abs(f_k * left_normal - b_k)
            right = change[-1] + lam * (right_flux - g_faces[-1] + (theta[-1] - theta[-2]) / dx)
            right -= lam * abs(f_k * right_normal - b_k)
            for value, cell in ((left, 1), (right, rec.grid.cells)):
                if value > worst_boundary[0]:
                    worst_boundary = (float(value), second.step, cell)

    if not pairs:
        raise ConfigError("no consecutive-step snapshots; run with snapshot_every=1")
    magnitude, step_n, cell = worst_interior
    interior_check = CheckResult(
        name="entropy_interior",
        passed=magnitude <= ENTROPY_TOL,
        magnitude=max(magnitude, 0.0),
        tolerance=ENTROPY_TOL,
        witness_step=step_n if magnitude > ENTROPY_TOL else None,
        witness_cell=cell if magnitude > ENTROPY_TOL else None,
        detail=f"{pairs} step pairs, {len(entropy_fluxes)} values of k",
    )
    b_mag, b_step, b_cell = worst_boundary
    boundary_check = CheckResult(
        name="entropy_boundary",
        passed=b_mag <= ENTROPY_TOL,
        magnitude=b_mag,
        tolerance=ENTROPY_TOL,
        witness_step=b_step,
        witness_cell=b_cell,
        asserted=False,
        detail="informational",
    )
    return {"interior": interior_check, "boundary": boundary_check}


def stationary_entropy_residual(
    u: CellField,
    prob: StationaryProblem,
    flux: Optional[NumericalFlux] = None,
    k_grid: Optional[Sequence[float]] = None,
    lam: float = 1.0,
) -> Dict[str, CheckResult]:
    """Cell-entropy residuals of a stationary solution with source g - u.

    Interior cells must satisfy
    λ[(G_{i+1/2} - G_{i-1/2})/δx - (Θ_{i+1} - 2Θ_i + Θ_{i-1})/δx²] - sign(u_i-k)(g_i-u_i) <= |r_i|
    where r is the pointwise residual of u + λΦ(u)_x = g, so an unconverged
    field is judged against its own defect. The boundary cells use ±|b(u) - b(k)|
    on the outer face with the allowance λ|f(k)·η - b(k)|/δx; that result is
    informational.
    """
    flux = godunov(prob.spec.f) if flux is None else flux
    spec = prob.spec
    k_grid = np.linspace(0.0, spec.u_max, 11) if k_grid is None else k_grid
    for k in k_grid:
        if k < 0 or k > spec.u_max:
            raise ConfigError(f"k = {k} outside [0, {spec.u_max}]")
    if u.grid != prob.grid:
        raise ConfigMismatchError("stationary field and source live on different grids")
    values = np.asarray(u.values)
    g = np.asarray(prob.g.values)
    dx = u.grid.dx
    defect = np.abs(assemble_residual(u, prob, flux=flux, lam=lam).values)
    phi_u = spec.phi.rule(values)
    b_u = spec.b.rule(values[[0, -1]])
    left_normal, right_normal = spec.boundary.normals

    worst_interior = (-np.inf, None)
    worst_boundary = (-np.inf, None)
    for k in k_grid:
        k = float(k)
        G = entropy_flux(flux, k)
        phi_k = float(spec.phi.rule(np.asarray(k)))
        f_k = float(flux.f.rule(np.asarray(k)))
        b_k = float(spec.b.rule(np.asarray(k)))
        theta = np.abs(phi_u - phi_k)
        g_faces = G(values[:-1], values[1:])
        source = np.sign(values - k) * (g - values)

        interior = lam * (
            (g_faces[1:] - g_faces[:-1]) / dx - (theta[2:] - 2.0 * theta[1:-1] + theta[:-2]) / dx ** 2
        ) - source[1:-1] - defect[1:-1]
        i = int(np.argmax(interior))
        if interior[i] > worst_interior[0]:
            worst_interior = (float(interior[i]), i + 2)

        left = lam * ((g_faces[0] + abs(b_u[0] - b_k)) / dx - (theta[1] - theta[0]) / dx ** 2)
        left -= source[0] + defect[0] + lam * abs(f_k * left_normal - b_k) / dx
        right = lam * ((abs(b_u[1] - b_k) - g_faces[-1]) / dx + (theta[-1] - theta[-2]) / dx ** 2)
        right -= source[-1] + defect[-1] + lam * abs(f_k * right_normal - b_k) / dx
        for value, cell in ((left, 1), (right, u.grid.cells)):
            if value > worst_boundary[0]:
                worst_boundary = (float(value), cell)

    magnitude, cell = worst_interior
    interior_check = CheckResult(
        name="stationary_entropy_interior",
        passed=magnitude <= STATIONARY_ENTROPY_TOL,
        magnitude=max(magnitude, 0.0),
        tolerance=STATIONARY_ENTROPY_TOL,
        witness_cell=cell if magnitude > STATIONARY_ENTROPY_TOL else None,
        detail=f"{len(k_grid)} values of k",
    )
    b_mag, b_cell = worst_boundary
    boundary_check = CheckResult(
        name="stationary_entropy_boundary",
        passed=b_mag <= STATIONARY_ENTROPY_TOL,
        magnitude=b_mag,
        tolerance=STATIONARY_ENTROPY_TOL,
        witness_cell=b_cell,
        asserted=False,
        detail="informational",
    )
    return {"interior": interior_check, "boundary": boundary_check}


def _check_same_setup(rec1: SolutionRecord, rec2: SolutionRecord) -> None:
    same = (
        rec1.grid == rec2.grid
        and rec1.dt == rec2.dt
        and rec1.flux_name == rec2.flux_name
        and rec1.epsilon == rec2.epsilon
        and rec1.paper_literal_left_boundary == rec2.paper_literal_left_boundary
        and [s.step for s in rec1.snapshots] == [s.step for s in rec2.snapshots]
    )
    if not same:
        raise ConfigMismatchError("records differ in grid, scheme or snapshot schedule")


def l1_distances(rec1: SolutionRecord, rec2: SolutionRecord) -> np.ndarray:
    _check_same_setup(rec1, rec2)
    return np.array([a.field.l1_distance(b.field) for a, b in zip(rec1.snapshots, rec2.snapshots)])


def l1_contraction_check(rec1: SolutionRecord, rec2: SolutionRecord, tol: float = CONTRACTION_TOL) -> CheckResult:
    """Σ|u_i^n - û_i^n|δx must be non-increasing over the snapshots."""
    distances = l1_distances(rec1, rec2)
    increases = np.diff(distances)
    if increases.size == 0:
        return CheckResult("l1_contraction", True, 0.0, tol)
    n = int(np.argmax(increases))
    worst = float(increases[n])
    return CheckResult(
        name="l1_contraction",
        passed=worst <= tol,
        magnitude=max(worst, 0.0),
        tolerance=tol,
        witness_step=rec1.snapshots[n + 1].step if worst > tol else None,
    )


def _integral_rhs(v: np.ndarray, u: np.ndarray, g: np.ndarray, dx: float) -> float:
    gap = v - u
    equal = np.abs(gap) <= EQUALITY_TOL
    signed = np.where(equal, 0.0, np.sign(gap)) * (u - g)
    return float((np.sum(signed) + np.sum(np.abs(u - g)[equal])) * dx)


def distance_series(rec: SolutionRecord, u_stat: CellField) -> np.ndarray:
    """D(t) = Σ|v_i(t) - u_i|δx at every snapshot."""
    if rec.grid != u_stat.grid:
        raise ConfigMismatchError("stationary state lives on a different grid")
    return np.array([snap.field.l1_distance(u_stat) for snap in rec.snapshots])


def integral_solution_check(
    rec: SolutionRecord,
    u_stat: CellField,
    g: CellField,
    tol: float = 1e-8,
) -> CheckResult:
    """Discrete form of d/dt‖v - u‖ <= ∫sign₀(v-u)(u-g) + ∫_{v=u}|u-g|.

    The rate over each snapshot interval is compared with the larger of the
    right-hand sides at its two ends.
    """
    if g.grid != u_stat.grid or rec.grid != g.grid:
        raise ConfigMismatchError("record, stationary state and source must share a grid")
    u = np.asarray(u_stat.values)
    gv = np.asarray(g.values)
    dx = rec.grid.dx
    distances = distance_series(rec, u_stat)
    rhs = np.array([_integral_rhs(np.asarray(s.field.values), u, gv, dx) for s in rec.snapshots])
    times = np.array(rec.snapshot_times)

    worst, witness = -np.inf, None
    for n in range(len(times) - 1):
        span = times[n + 1] - times[n]
        if span <= 0:
            continue
        rate = (distances[n + 1] - distances[n]) / span
        violation = rate - max(rhs[n], rhs[n + 1])
        if violation > worst:
            worst, witness = violation, rec.snapshots[n + 1].step
    if witness is None:
        return CheckResult("integral_solution", True, 0.0, tol)
    return CheckResult(
        name="integral_solution",
        passed=worst <= tol,
        magnitude=max(worst, 0.0),
        tolerance=tol,
        witness_step=witness if worst > tol else None,
    )


def boundary_layer_indicator(field: CellField, width: int = 2, side: str = "both") -> float:
    """Steepest gradient next to a boundary relative to the interior gradient.

    The reference gradient is the larger of the median |u_{i+1}-u_i|/δx over
    the interior third and the mean oscillation (max u - min u)/(b_end - a).
    A constant field gives 1.
    """
    grid = field.grid
    if width < 1 or width > grid.cells / 4:
        raise ConfigError(f"width must lie in [1, I/4], got {width}")
    u = np.asarray(field.values)
    grads = np.abs(np.diff(u)) / grid.dx
    sides = {"left": grads[:width], "right": grads[-width:]}
    if side == "both":
        edge = max(float(sides["left"].max()), float(sides["right"].max()))
    elif side in sides:
        edge = float(sides[side].max())
    else:
        raise ConfigError(f"side must be 'left', 'right' or 'both', got '{side}'")
    third = grid.cells // 3
    interior = float(np.median(grads[third: 2 * third])) if 2 * third > third else 0.0
    spread = float(u.max() - u.min()) / (grid.b_end - grid.a)
    reference = max(interior, spread)
    if reference == 0.0:
        return 1.0
    return edge / reference


def boundary_condition_check(field: CellField, width: int = 2, expected_fail: bool = False) -> CheckResult:
    """Passes when no boundary layer is detected on ``field``."""
    ratio = boundary_layer_indicator(field, width)
    return CheckResult(
        name="boundary_condition",
        passed=ratio <= LAYER_THRESHOLD,
        magnitude=ratio,
        tolerance=LAYER_THRESHOLD,
        witness_cell=None if ratio <= LAYER_THRESHOLD else _layer_cell(field, width),
        expected_fail=expected_fail,
    )


def _layer_cell(field: CellField, width: int) -> int:
    grads = np.abs(np.diff(np.asarray(field.values)))
    left, right = grads[:width], grads[-width:]
    if left.max() >= right.max():
        return int(np.argmax(left)) + 1
    return field.grid.cells - width + int(np.argmax(right))


@dataclass(frozen=True)
class ViscousNorms:
    epsilon: float
    gradient: float
    phi_h1: float
    boundary_l1: float


def _viscous_norms(rec: SolutionRecord, spec: ProblemSpec) -> ViscousNorms:
    eps = rec.epsilon
    dx = rec.grid.dx
    phi_eps = viscous(spec.phi, eps)
    gradient = phi_h1 = 0.0
    for first, second in zip(rec.snapshots, rec.snapshots[1:]):
        dt = second.time - first.time
        u = np.asarray(first.field.values)
        du = np.diff(u) / dx
        p = phi_eps.rule(u)
        dp = np.diff(p) / dx
        gradient += eps * float(np.sum(du * du)) * dx * dt
        phi_h1 += float(np.sum(p * p) + np.sum(dp * dp)) * dx * dt
    dts = np.asarray(rec.step_dts)
    boundary = float(np.sum((np.abs(rec.left_flux) + np.abs(rec.right_flux)) * dts)) if rec.steps else 0.0
    return ViscousNorms(eps, gradient, phi_h1, boundary)


def viscous_estimates(recs: Mapping[float, SolutionRecord], spec: ProblemSpec) -> Dict[str, object]:
    """Discrete norms of the ε-uniform estimates across an ε sweep.

    The gradient and H¹ sums use the recorded snapshots as a left-endpoint
    quadrature in time; the boundary sum uses every step. A norm fails when it
    grows by more than a factor 2 from one ε to the next smaller one.
    """
    if len(recs) < 2:
        raise ConfigError("viscous_estimates needs at least two values of ε")
    if any(eps > 0 for eps in recs):
        reconstruct_beta(spec)
    ordered = sorted(recs.items(), key=lambda item: -item[0])
    norms = [_viscous_norms(rec, spec) for _, rec in ordered]
    checks = {}
    for attr, label in (("gradient", "estimate_gradient"), ("phi_h1", "estimate_phi_h1"), ("boundary_l1", "estimate_boundary")):
        values = np.array([getattr(n, attr) for n in norms])
        growth = 0.0
        for prev, cur in zip(values, values[1:]):
            if prev > 0:
                growth = max(growth, cur / prev)
            elif cur > 0:
                growth = np.inf
        checks[label] = CheckResult(
            name=label,
            passed=growth <= GROWTH_LIMIT,
            magnitude=float(growth),
            tolerance=GROWTH_LIMIT,
        )
    return {"norms": norms, "checks": checks}


def run_diagnostics(
    rec: SolutionRecord,
    spec: ProblemSpec,
    flux: NumericalFlux,
    k_grid: Optional[Sequence[float]] = None,
    expected_fail: Sequence[str] = (),
) -> DiagnosticsReport:
    """Standard report for a time run."""
    k_grid = np.linspace(0.0, spec.u_max, 11) if k_grid is None else k_grid
    report = DiagnosticsReport()
    scan = max_principle_scan(rec, spec.u_max)
    report.add(_with_expectation(scan, expected_fail))
    report.add(_with_expectation(mass_balance_check(rec), expected_fail))
    if any(b.step == a.step + 1 for a, b in zip(rec.snapshots, rec.snapshots[1:])):
        entropy = entropy_residual(rec, spec, flux, k_grid)
        report.add(_with_expectation(entropy["interior"], expected_fail))
        report.add(entropy["boundary"])
    if rec.grid.cells >= 8:
        report.add(boundary_condition_check(rec.final, expected_fail="boundary_condition" in expected_fail))
    for check in report.checks:
        if check.expected_fail and not check.reproduced:
            log.warning("expected failure of %s was not reproduced (magnitude %.3e)", check.name, check.magnitude)
    return report


def _with_expectation(check: CheckResult, expected_fail: Sequence[str]) -> CheckResult:
    if check.name not in expected_fail:
        return check
    return CheckResult(**{**check.__dict__, "expected_fail": True})
