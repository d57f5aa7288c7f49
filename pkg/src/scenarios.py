"""Named problem presets and custom problems built from the function library."""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Mapping, Tuple

from .errors import ConfigError
from . import library
from .problem import DiffusionSpec, PiecewiseConstant, ProblemSpec

U_C = 0.6
U_MAX = 1.0
REFERENCE_DX = 0.01
REFERENCE_HORIZON = 0.12


def reference_dt(dx: float) -> float:
    """δt = δx²/5."""
    return dx * dx / 5.0


def step_initial(value: float = 0.7, at: float = 0.5) -> PiecewiseConstant:
    """u0 = value on [at, ∞), 0 before."""
    return PiecewiseConstant([at], [0.0, value])


@dataclass(frozen=True)
class Scenario:
    """A preset: problem data plus the discretisation it is meant to run with.

    ``expected_fail`` names diagnostics that are supposed to fail because the
    preset deliberately violates a hypothesis.
    """

    name: str
    description: str
    build: Callable[[], ProblemSpec]
    dx: float = REFERENCE_DX
    violated: Tuple[str, ...] = ()
    expected_fail: FrozenSet[str] = field(default_factory=frozenset)

    @property
    def spec(self) -> ProblemSpec:
        return self.build()


def _reference_problem(name: str, f, boundary_kind: str, level: float = 0.7) -> ProblemSpec:
    phi = library.threshold_diffusion(U_C)
    return ProblemSpec(
        f=f,
        diffusion=DiffusionSpec(phi=phi, u_c=U_C, u_max=U_MAX),
        boundary=library.boundary(boundary_kind, phi),
        u0=step_initial(level),
        domain=(0.0, 1.0),
        horizon=REFERENCE_HORIZON,
        name=name,
    )


SCENARIOS: Dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario(
            name="fig1",
            description="f = u²/2, b = φ: H3 violated, loss of the maximum principle",
            build=lambda: _reference_problem("fig1", library.burgers(U_MAX), "phi"),
            violated=("H3",),
            expected_fail=frozenset({"max_principle"}),
        ),
        Scenario(
            name="fig1-saturated",
            description="fig1 with u0 = 1 on [1/2, 1]: the state reaches u_max at the outflow boundary",
            build=lambda: _reference_problem("fig1-saturated", library.burgers(U_MAX), "phi", level=U_MAX),
            violated=("H3",),
            expected_fail=frozenset({"max_principle"}),
        ),
        Scenario(
            name="fig2",
            description="f = u(1-u), b = u: H2 violated, boundary layer at x = 1",
            build=lambda: _reference_problem("fig2", library.lwr(), "identity"),
            violated=("H2",),
            expected_fail=frozenset({"boundary_condition"}),
        ),
        Scenario(
            name="fig3",
            description="f = u(1-u), b = φ: all hypotheses hold",
            build=lambda: _reference_problem("fig3", library.lwr(), "phi"),
        ),
        Scenario(
            name="zero-flux",
            description="f = u(1-u), b = 0: zero-flux boundary",
            build=lambda: _reference_problem("zero-flux", library.lwr(), "zero"),
        ),
    )
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario '{name}' (choose from {', '.join(SCENARIOS)})")


def _initial_from(data: Any) -> PiecewiseConstant:
    if data is None:
        return step_initial()
    if isinstance(data, (int, float)):
        return PiecewiseConstant([], [float(data)])
    if isinstance(data, Mapping):
        kind = data.get("type", "step")
        if kind == "constant":
            return PiecewiseConstant([], [float(data.get("value", 0.0))])
        if kind == "step":
            return step_initial(float(data.get("value", 0.7)), float(data.get("at", 0.5)))
        if kind == "piecewise":
            return PiecewiseConstant(data.get("breaks", []), data.get("values", [0.0]))
    raise ConfigError(f"cannot read initial data from {data!r}")


def custom_problem(data: Mapping[str, Any], name: str = "custom") -> ProblemSpec:
    """ProblemSpec from a ``problem:`` mapping of a manifest file.

    Keys: ``flux_fn`` (burgers | lwr | zero), ``u_c``, ``u_max``, ``boundary``
    (zero | phi | scaled-phi | identity), ``boundary_scale``, ``u0``,
    ``domain`` ([a, b_end]) and ``horizon``.
    """
    u_c = float(data.get("u_c", U_C))
    u_max = float(data.get("u_max", U_MAX))
    phi = library.threshold_diffusion(u_c)
    domain = tuple(float(x) for x in data.get("domain", (0.0, 1.0)))
    if len(domain) != 2:
        raise ConfigError("domain must be [a, b_end]")
    spec = ProblemSpec(
        f=library.flux_function(str(data.get("flux_fn", "lwr")), u_max),
        diffusion=DiffusionSpec(phi=phi, u_c=u_c, u_max=u_max),
        boundary=library.boundary(str(data.get("boundary", "phi")), phi, data.get("boundary_scale")),
        u0=_initial_from(data.get("u0")),
        domain=domain,
        horizon=float(data.get("horizon", REFERENCE_HORIZON)),
        name=name,
    )
    spec.check()
    return spec
