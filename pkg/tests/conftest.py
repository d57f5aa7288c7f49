"""Shared fixtures: preset problems, grids and scheme configurations."""

from dataclasses import replace

import numpy as np
import pytest

from src.fv_solver import CellField, Grid, SchemeConfig
from src.numflux import godunov
from src.scenarios import get_scenario, reference_dt


@pytest.fixture
def fig1_spec():
    return get_scenario("fig1").spec


@pytest.fixture
def fig2_spec():
    return get_scenario("fig2").spec


@pytest.fixture
def fig3_spec():
    return get_scenario("fig3").spec


@pytest.fixture
def zero_flux_spec():
    return get_scenario("zero-flux").spec


@pytest.fixture
def reference_grid():
    return Grid(0.0, 1.0, 100)


@pytest.fixture
def small_grid():
    return Grid(0.0, 1.0, 20)


@pytest.fixture
def reference_config(fig3_spec):
    return SchemeConfig(flux=godunov(fig3_spec.f), dt=reference_dt(0.01))


@pytest.fixture
def short(fig3_spec):
    """fig3 data with a short horizon."""
    return replace(fig3_spec, horizon=0.004)


def random_field(grid: Grid, rng: np.random.Generator, u_max: float = 1.0) -> CellField:
    return CellField(grid, rng.uniform(0.0, u_max, grid.cells))
