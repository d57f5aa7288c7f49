"""Run manifests: YAML configuration merged with command-line options."""

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from .errors import ConfigError
from .fv_solver import Grid, SchemeConfig
from .numflux import make_flux
from .problem import ProblemSpec
from .scenarios import Scenario, custom_problem, get_scenario, reference_dt

DEFAULT_OUT = "./degenfv_results"


def load_config(config_path) -> Dict[str, Any]:
    """Load configuration from a YAML file."""
    if config_path and Path(config_path).exists():
        with open(config_path, 'r') as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{config_path}: expected a mapping of keys to values")
        return data
    if config_path:
        raise ConfigError(f"config file not found: {config_path}")
    return {}


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to set up a run before any computation."""

    scenario: Optional[str] = None
    config_path: Optional[str] = None
    dx: Optional[float] = None
    cells: Optional[int] = None
    flux: str = "godunov"
    epsilon: float = 0.0
    dt: Any = None
    cfl_safety: float = 0.9
    horizon: Optional[float] = None
    snapshots: Tuple[float, ...] = ()
    out: str = DEFAULT_OUT
    seed: Optional[int] = None
    paper_literal_left_boundary: bool = False
    gnuplot: bool = False
    problem: Optional[Dict[str, Any]] = None
    g: Any = None

    @classmethod
    def from_sources(cls, options: Dict[str, Any], config_data: Dict[str, Any]) -> "RunManifest":
        """CLI options win; config keys fill whatever the CLI left unset."""
        known = {f.name for f in fields(cls)}
        unknown = set(config_data) - known
        if unknown:
            raise ConfigError(f"unknown manifest keys: {', '.join(sorted(unknown))}")
        merged = dict(config_data)
        merged.update({k: v for k, v in options.items() if v is not None and k in known})
        if merged.get("out") is None:
            merged["out"] = os.getenv("DEGENFV_OUT", DEFAULT_OUT)
        if merged.get("seed") is None and os.getenv("DEGENFV_SEED"):
            try:
                merged["seed"] = int(os.environ["DEGENFV_SEED"])
            except ValueError:
                raise ConfigError("DEGENFV_SEED must be an integer")
        if merged.get("seed") is None:
            merged["seed"] = 0
        if "snapshots" in merged and merged["snapshots"] is not None:
            merged["snapshots"] = tuple(float(t) for t in merged["snapshots"])
        else:
            merged.pop("snapshots", None)
        manifest = cls(**merged)
        if manifest.scenario is None and manifest.problem is None:
            manifest = replace(manifest, scenario="fig3")
        return manifest


@dataclass(frozen=True)
class ResolvedRun:
    """A manifest turned into problem, grid and scheme."""

    name: str
    spec: ProblemSpec
    grid: Grid
    config: SchemeConfig
    scenario: Optional[Scenario] = None
    expected_fail: frozenset = field(default_factory=frozenset)


def _resolve_dt(value: Any, dx: float) -> Optional[float]:
    if value is None or value == "paper":
        return reference_dt(dx)
    if value == "cfl":
        return None
    try:
        dt = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"dt must be 'paper', 'cfl' or a number, got {value!r}")
    if dt <= 0:
        raise ConfigError("dt must be positive")
    return dt


def resolve(manifest: RunManifest) -> ResolvedRun:
    """Build ProblemSpec, Grid and SchemeConfig; raises ConfigError on bad input."""
    scenario = None
    if manifest.problem is not None:
        spec = custom_problem(manifest.problem, name=manifest.scenario or "custom")
        default_dx = 0.01
        expected = frozenset()
    else:
        scenario = get_scenario(manifest.scenario)
        spec = scenario.spec
        default_dx = scenario.dx
        expected = scenario.expected_fail
    if manifest.horizon is not None:
        if manifest.horizon <= 0:
            raise ConfigError("horizon must be positive")
        spec = replace(spec, horizon=float(manifest.horizon))

    a, b_end = spec.domain
    if manifest.cells is not None:
        grid = Grid(a, b_end, int(manifest.cells))
    else:
        grid = Grid.from_dx(a, b_end, float(manifest.dx or default_dx))

    flux = make_flux(manifest.flux, spec.f, spec.u_max)
    snapshots = manifest.snapshots or tuple(spec.horizon * k / 3.0 for k in (1, 2, 3))
    config = SchemeConfig(
        flux=flux,
        dt=_resolve_dt(manifest.dt, grid.dx),
        cfl_safety=float(manifest.cfl_safety),
        epsilon=float(manifest.epsilon),
        snapshot_times=tuple(snapshots),
        paper_literal_left_boundary=bool(manifest.paper_literal_left_boundary),
    )
    name = scenario.name if scenario else spec.name
    return ResolvedRun(name=name, spec=spec, grid=grid, config=config, scenario=scenario, expected_fail=expected)
