"""Continuous problem data and the standing-hypothesis checks.

The problem is u_t + f(u)_x - φ(u)_xx = 0 on an interval (a, b_end) with the
flux boundary condition b(u) - (f(u) - φ(u)_x)·η = 0, where η(a) = -1 and
η(b_end) = +1. Every check here is sampling based and returns its evidence.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InconsistentBoundaryError, NoBetaError

log = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_SAMPLES = 10_000
# Spacing of the global dyadic lattice used by lipschitz_estimate.
LATTICE_SPACING = 2.0 ** -16
# Slope ratios above this are treated as unbounded by check_h2.
UNBOUNDED_SLOPE = 1e8


@dataclass(frozen=True)
class ScalarFn:
    """A real function on [0, u_max] with a Lipschitz bound.

    Args:
        rule: Vectorised evaluation rule.
        lipschitz: Declared or estimated Lipschitz constant on [0, u_max].
        name: Human-readable label used in reports.
        critical_points: Points where the function changes monotonicity or is
            not differentiable. When given, flux constructors use exact
            candidate evaluation instead of dense sampling.
        derivative: Optional vectorised derivative.
    """

    rule: ArrayFn
    lipschitz: float
    name: str = "g"
    critical_points: Optional[Tuple[float, ...]] = None
    derivative: Optional[ArrayFn] = None

    def __call__(self, s):
        values = self.rule(np.asarray(s, dtype=float))
        if np.ndim(s) == 0:
            return float(values)
        return np.asarray(values, dtype=float)

    @classmethod
    def from_rule(cls, rule: ArrayFn, u_max: float, name: str = "g", **kwargs) -> "ScalarFn":
        """Build a ScalarFn whose Lipschitz constant is estimated on [0, u_max]."""
        lipschitz = _lattice_slope(rule, 0.0, u_max)
        return cls(rule=rule, lipschitz=lipschitz, name=name, **kwargs)

    def check(self, u_max: float, rtol: float = 1e-8) -> None:
        """Raise ConfigError if the function is non-finite or exceeds its bound."""
        samples = np.linspace(0.0, u_max, DEFAULT_SAMPLES + 1)
        values = self(samples)
        if not np.all(np.isfinite(values)):
            raise ConfigError(f"{self.name} is not finite on [0, {u_max}]")
        slope = lipschitz_estimate(self, (0.0, u_max))
        if slope > self.lipschitz * (1.0 + rtol) + 1e-15:
            raise ConfigError(
                f"{self.name}: sampled slope {slope:.6g} exceeds declared "
                f"Lipschitz constant {self.lipschitz:.6g}"
            )


@dataclass(frozen=True)
class DiffusionSpec:
    """The degenerate diffusion φ, zero on [0, u_c] and increasing after."""

    phi: ScalarFn
    u_c: float
    u_max: float

    def check(self, n_samples: int = DEFAULT_SAMPLES) -> None:
        if self.u_max <= 0:
            raise ConfigError("u_max must be positive")
        if not 0.0 <= self.u_c <= self.u_max:
            raise ConfigError(f"u_c = {self.u_c} is outside [0, {self.u_max}]")
        self.phi.check(self.u_max)
        s = np.linspace(0.0, self.u_max, n_samples + 1)
        values = self.phi(s)
        flat = s <= self.u_c
        if np.any(np.abs(values[flat]) > 1e-12):
            raise ConfigError("φ must vanish on [0, u_c]")
        rising = values[s >= self.u_c]
        if rising.size > 1 and np.any(np.diff(rising) <= 0.0):
            raise ConfigError("φ must be strictly increasing on [u_c, u_max]")
        h = s[1] - s[0]
        if np.any(np.abs(np.diff(values)) > self.phi.lipschitz * h * (1.0 + 1e-8) + 1e-15):
            raise ConfigError("φ has a jump larger than its Lipschitz bound allows")


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary function b, optionally factored as b = β∘φ."""

    b: ScalarFn
    beta: Optional[ScalarFn] = None
    normals: Tuple[int, int] = (-1, 1)

    def check(self, diffusion: DiffusionSpec, n_samples: int = DEFAULT_SAMPLES) -> None:
        s = np.linspace(0.0, diffusion.u_max, n_samples + 1)
        values = self.b(s)
        if np.any(np.diff(values) < -1e-15):
            raise ConfigError(f"{self.b.name} must be non-decreasing")
        if self.beta is not None:
            gap = np.max(np.abs(values - self.beta(diffusion.phi(s))))
            if gap > 1e-12:
                raise ConfigError(f"b differs from β∘φ by {gap:.3e}")


class PiecewiseConstant:
    """Piecewise-constant initial data with exact interval integration.

    ``values[k]`` holds on ``[breaks[k-1], breaks[k])``; ``values`` has one more
    entry than ``breaks``.
    """

    def __init__(self, breaks: Sequence[float], values: Sequence[float]):
        self.breaks = np.asarray(breaks, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.size != self.breaks.size + 1:
            raise ConfigError("piecewise-constant data needs len(values) == len(breaks) + 1")
        if np.any(np.diff(self.breaks) <= 0):
            raise ConfigError("breaks must be strictly increasing")
        steps = self.values[1:-1] * np.diff(self.breaks) if self.breaks.size > 1 else np.zeros(0)
        self._cumulative = np.concatenate([[0.0], np.cumsum(steps)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.values[np.searchsorted(self.breaks, x, side="right")]

    def antiderivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.breaks.size == 0:
            return self.values[0] * x
        j = np.searchsorted(self.breaks, x, side="right")
        left = self.values[0] * (x - self.breaks[0])
        anchor = self.breaks[np.maximum(j - 1, 0)]
        right = self._cumulative[np.maximum(j - 1, 0)] + self.values[j] * (x - anchor)
        return np.where(j == 0, left, right)

    def integrate(self, lo, hi) -> np.ndarray:
        return self.antiderivative(hi) - self.antiderivative(lo)


@dataclass(frozen=True)
class ProblemSpec:
    """The continuous problem (P)."""

    f: ScalarFn
    diffusion: DiffusionSpec
    boundary: BoundarySpec
    u0: Callable
    domain: Tuple[float, float] = (0.0, 1.0)
    horizon: float = 0.12
    name: str = "custom"

    @property
    def u_max(self) -> float:
        return self.diffusion.u_max

    @property
    def phi(self) -> ScalarFn:
        return self.diffusion.phi

    @property
    def b(self) -> ScalarFn:
        return self.boundary.b

    def check(self, n_samples: int = DEFAULT_SAMPLES) -> None:
        """Validate the spec invariants; raises ConfigError on the first violation."""
        a, b_end = self.domain
        if not b_end > a:
            raise ConfigError(f"empty domain ({a}, {b_end})")
        if not self.horizon > 0:
            raise ConfigError("the horizon T must be positive")
        self.f.check(self.u_max)
        self.diffusion.check(n_samples)
        self.boundary.check(self.diffusion, n_samples)
        x = np.linspace(a, b_end, n_samples + 1)
        u0 = np.asarray(self.u0(x), dtype=float)
        if np.any(u0 < 0.0) or np.any(u0 > self.u_max):
            raise ConfigError(f"u0 leaves [0, {self.u_max}]")


@dataclass(frozen=True)
class BetaTable:
    """Monotone table for β on the range of φ, linearly extended past its end."""

    phi_values: np.ndarray
    b_values: np.ndarray
    lipschitz: float

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        inside = np.interp(p, self.phi_values, self.b_values)
        if self.phi_values.size > 1:
            tail = (self.b_values[-1] - self.b_values[-2]) / (self.phi_values[-1] - self.phi_values[-2])
        else:
            tail = 0.0
        beyond = self.b_values[-1] + tail * (p - self.phi_values[-1])
        out = np.where(p > self.phi_values[-1], beyond, inside)
        return float(out) if out.ndim == 0 else out

    def as_scalar_fn(self) -> ScalarFn:
        return ScalarFn(rule=self.__call__, lipschitz=self.lipschitz, name="β (table)")


@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome of one hypothesis check together with its numeric evidence."""

    name: str
    passed: bool
    evidence: Dict[str, float] = field(default_factory=dict)
    detail: str = ""
    beta: Optional[BetaTable] = None


@dataclass(frozen=True)
class HypothesisReport:
    h1: HypothesisCheck
    h2: HypothesisCheck
    h3: HypothesisCheck
    nondegeneracy: HypothesisCheck

    @property
    def checks(self) -> Tuple[HypothesisCheck, ...]:
        return (self.h1, self.h2, self.h3, self.nondegeneracy)

    @property
    def h1_pass(self) -> bool:
        return self.h1.passed

    @property
    def h2_pass(self) -> bool:
        return self.h2.passed

    @property
    def h3_pass(self) -> bool:
        return self.h3.passed

    @property
    def nondegenerate(self) -> bool:
        return self.nondegeneracy.passed


def _lattice_points(lo: float, hi: float) -> np.ndarray:
    h = LATTICE_SPACING
    # Coarsen dyadically on long intervals so the sample stays bounded.
    while (hi - lo) / h > 2 ** 21:
        h *= 2.0
    start, stop = math.ceil(lo / h), math.floor(hi / h)
    return np.arange(start, stop + 1, dtype=float) * h


def _lattice_slope(rule: ArrayFn, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    s = _lattice_points(lo, hi)
    if s.size < 2:
        s = np.array([lo, hi])
    values = np.asarray(rule(s), dtype=float)
    slopes = np.abs(np.diff(values)) / np.diff(s)
    return float(np.max(slopes)) if slopes.size else 0.0


def lipschitz_estimate(g: ScalarFn, interval: Tuple[float, float]) -> float:
    """Largest secant slope of ``g`` over a global dyadic lattice in ``interval``.

    Only lattice points inside the interval are used, so the estimate on a
    sub-interval never exceeds the estimate on a containing interval.
    """
    lo, hi = interval
    return _lattice_slope(g.rule, float(lo), float(hi))


def check_h1(spec: ProblemSpec) -> HypothesisCheck:
    f0 = abs(spec.f(0.0))
    b0 = abs(spec.b(0.0))
    return HypothesisCheck(
        name="H1",
        passed=f0 <= 1e-12 and b0 <= 1e-12,
        evidence={"|f(0)|": f0, "|b(0)|": b0},
    )


def check_h2(spec: ProblemSpec, n_samples: int = DEFAULT_SAMPLES) -> HypothesisCheck:
    """Check that b factors as β∘φ with β non-decreasing and Lipschitz.

    Returns the measured Lipschitz constant of β and a monotone table for β
    on the range of φ.

    Raises:
        InconsistentBoundaryError: b differs at two points where φ agrees
            outside the flat region [0, u_c].
    """
    if n_samples < 100:
        raise ConfigError("check_h2 needs at least 100 samples")
    s = np.linspace(0.0, spec.u_max, n_samples + 1)
    phi = spec.phi(s)
    b = spec.b(s)

    flat = s <= spec.diffusion.u_c
    variation = float(np.max(np.abs(b[flat] - b[0])))
    if variation > 1e-12:
        return HypothesisCheck(
            name="H2",
            passed=False,
            evidence={"b variation on [0, u_c]": variation},
            detail="b is not constant where φ vanishes",
        )

    dphi = np.diff(phi)
    db = np.diff(b)
    ties = (np.abs(dphi) <= 1e-15) & (np.abs(db) > 1e-12)
    if np.any(ties):
        where = s[1:][ties][0]
        raise InconsistentBoundaryError(f"b changes at u = {where:.6g} where φ is constant")

    moving = dphi > 0
    ratios = np.abs(db[moving]) / dphi[moving]
    lipschitz = float(np.max(ratios)) if ratios.size else 0.0
    if not math.isfinite(lipschitz) or lipschitz > UNBOUNDED_SLOPE:
        return HypothesisCheck(
            name="H2",
            passed=False,
            evidence={"β slope": lipschitz},
            detail="|Δb| / |Δφ| is unbounded",
        )

    keep = s >= spec.diffusion.u_c
    phi_values, first = np.unique(phi[keep], return_index=True)
    b_values = b[keep][first]
    if phi_values.size == 0 or phi_values[0] > 0.0:
        phi_values = np.concatenate([[0.0], phi_values])
        b_values = np.concatenate([[b[0]], b_values])
    table = BetaTable(phi_values=phi_values, b_values=b_values, lipschitz=lipschitz)
    monotone = bool(np.all(np.diff(b_values) >= -1e-15))
    return HypothesisCheck(
        name="H2",
        passed=monotone,
        evidence={"β Lipschitz": lipschitz},
        detail="" if monotone else "reconstructed β is decreasing somewhere",
        beta=table if monotone else None,
    )


def reconstruct_beta(spec: ProblemSpec) -> ScalarFn:
    """β for b = β∘φ: the declared one, else the table from check_h2."""
    if spec.boundary.beta is not None:
        return spec.boundary.beta
    result = check_h2(spec)
    if not result.passed or result.beta is None:
        raise NoBetaError(f"b does not factor through φ ({result.detail})")
    return result.beta.as_scalar_fn()


def check_h3(spec: ProblemSpec) -> HypothesisCheck:
    b_max = spec.b(spec.u_max)
    f_max = abs(spec.f(spec.u_max))
    margin = b_max - f_max
    return HypothesisCheck(
        name="H3",
        passed=margin >= -1e-12,
        evidence={"margin": margin, "b(u_max)": b_max, "|f(u_max)|": f_max},
    )


def check_nondegeneracy(
    spec: ProblemSpec,
    window: Optional[float] = None,
    tol: float = 1e-6,
    n_samples: int = DEFAULT_SAMPLES,
) -> HypothesisCheck:
    """Scan [0, u_c] for windows on which f is affine.

    The pair (f, φ) is flagged degenerate when the discrete curvature
    |f(s+h) - 2f(s) + f(s-h)|/h² stays below ``tol`` over a stretch at least
    ``window`` long. The threshold never drops below the round-off level of
    the second differences, which grows like 1/h². Advisory only.
    """
    u_c = spec.diffusion.u_c
    if u_c <= 0.0:
        return HypothesisCheck(name="non-degeneracy", passed=True, evidence={"longest affine window": 0.0})
    window = u_c / 20.0 if window is None else window
    if window <= 0:
        raise ConfigError("window must be positive")
    h = min(spec.u_max / n_samples, window / 10.0)
    count = max(int(math.ceil(u_c / h)), 2)
    s = np.linspace(0.0, u_c, count + 1)
    h = s[1] - s[0]
    values = spec.f(s)
    curvature = np.abs(values[2:] - 2.0 * values[1:-1] + values[:-2]) / h ** 2
    noise = 16.0 * np.finfo(float).eps * float(np.max(np.abs(values))) / h ** 2
    threshold = max(tol, noise)

    longest_run = run = 0
    for is_flat in curvature < threshold:
        run = run + 1 if is_flat else 0
        longest_run = max(longest_run, run)
    longest = (longest_run + 1) * h if longest_run else 0.0

    degenerate = longest >= window - 0.5 * h
    if degenerate:
        log.warning("f is affine on a window of length %.4g inside [0, u_c]", longest)
    return HypothesisCheck(
        name="non-degeneracy",
        passed=not degenerate,
        evidence={"longest affine window": longest, "window": window},
    )


def hypothesis_report(spec: ProblemSpec, n_samples: int = DEFAULT_SAMPLES) -> HypothesisReport:
    """Run all hypothesis checks; never raises for failing hypotheses."""
    try:
        h2 = check_h2(spec, n_samples)
    except InconsistentBoundaryError as e:
        h2 = HypothesisCheck(name="H2", passed=False, detail=f"inconsistent b: {e}")
    return HypothesisReport(
        h1=check_h1(spec),
        h2=h2,
        h3=check_h3(spec),
        nondegeneracy=check_nondegeneracy(spec, n_samples=n_samples),
    )
