"""Grid, initialisation, time step and the explicit scheme."""

import logging
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src import library
from src.diagnostics import l1_contraction_check, mass_balance_check
from src.errors import ConfigError, InitOutOfRangeError, NoBetaError, NonFiniteStateError
from src.fv_solver import (
    CellField,
    Grid,
    SchemeConfig,
    compute_dt,
    init_cells,
    resolve_dt,
    run,
    run_many,
    step,
    viscous_run,
)
from src.numflux import godunov, rusanov
from src.problem import BoundarySpec, PiecewiseConstant
from src.scenarios import get_scenario, reference_dt

seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestGrid:
    def test_from_dx(self):
        grid = Grid.from_dx(0.0, 1.0, 0.01)
        assert grid.cells == 100
        assert grid.dx == pytest.approx(0.01)
        assert grid.faces[0] == 0.0 and grid.faces[-1] == 1.0
        assert grid.centers[0] == pytest.approx(0.005)

    def test_too_few_cells(self):
        with pytest.raises(ConfigError):
            Grid(0.0, 1.0, 2)

    def test_refine_and_coarsen(self, small_grid):
        fine = small_grid.refine()
        assert fine.cells == 40
        field = CellField(fine, np.arange(40, dtype=float))
        coarse = field.coarsen()
        assert coarse.grid == small_grid
        assert coarse.values[0] == pytest.approx(0.5)


class TestCellField:
    def test_values_are_read_only(self, small_grid):
        field = CellField.constant(small_grid, 0.3)
        with pytest.raises(ValueError):
            field.values[0] = 1.0

    def test_mass_and_distance(self, small_grid):
        a = CellField.constant(small_grid, 0.3)
        b = CellField.constant(small_grid, 0.5)
        assert a.mass == pytest.approx(0.3)
        assert a.l1_distance(b) == pytest.approx(0.2)

    def test_shape_mismatch(self, small_grid):
        with pytest.raises(ConfigError):
            CellField(small_grid, np.zeros(3))


class TestInitCells:
    def test_step_data_exact(self, fig3_spec, reference_grid):
        u = init_cells(fig3_spec, reference_grid)
        assert u.values[49] == 0.0
        assert u.values[50] == pytest.approx(0.7)
        assert u.mass == pytest.approx(0.35)

    def test_step_inside_a_cell(self, fig3_spec):
        spec = replace(fig3_spec, u0=PiecewiseConstant([0.525], [0.0, 0.7]))
        u = init_cells(spec, Grid(0.0, 1.0, 20))
        assert u.values[10] == pytest.approx(0.35)

    def test_quadrature_for_callables(self, fig3_spec, small_grid):
        spec = replace(fig3_spec, u0=lambda x: x)
        u = init_cells(spec, small_grid)
        np.testing.assert_allclose(u.values, small_grid.centers, atol=1e-14)

    def test_out_of_range(self, fig3_spec, small_grid):
        spec = replace(fig3_spec, u0=PiecewiseConstant([], [1.5]))
        with pytest.raises(InitOutOfRangeError):
            init_cells(spec, small_grid)


class TestTimeStep:
    def test_cfl_bound(self, fig3_spec, reference_grid):
        config = SchemeConfig(flux=godunov(fig3_spec.f))
        assert compute_dt(fig3_spec, reference_grid, config) == pytest.approx(0.9 * 1e-4 / 2.01)

    def test_rusanov_uses_its_speed(self, fig3_spec, reference_grid):
        config = SchemeConfig(flux=rusanov(fig3_spec.f))
        assert compute_dt(fig3_spec, reference_grid, config) == pytest.approx(0.9 * 1e-4 / (1.05 * 0.01 + 2.0))

    def test_epsilon_tightens_the_bound(self, fig3_spec, reference_grid):
        flux = godunov(fig3_spec.f)
        plain = compute_dt(fig3_spec, reference_grid, SchemeConfig(flux=flux))
        viscous = compute_dt(fig3_spec, reference_grid, SchemeConfig(flux=flux, epsilon=0.5))
        assert viscous < plain

    def test_paper_step_is_below_the_bound(self, fig3_spec, reference_grid, reference_config):
        assert resolve_dt(fig3_spec, reference_grid, reference_config) == pytest.approx(2e-5)
        assert reference_dt(0.01) < compute_dt(fig3_spec, reference_grid, replace(reference_config, dt=None, cfl_safety=1.0))

    def test_steep_boundary_flux_limits_the_step(self, fig3_spec, reference_grid, caplog):
        boundary = BoundarySpec(b=library.scaled(fig3_spec.phi, 200.0))
        spec = replace(fig3_spec, boundary=boundary)
        config = SchemeConfig(flux=godunov(spec.f))
        with caplog.at_level(logging.WARNING, logger="src.fv_solver"):
            dt = compute_dt(spec, reference_grid, config)
        # (1 + 200)·δx + 1 beats the interior 1·δx + 2
        assert dt == pytest.approx(0.9 * 1e-4 / 3.01)
        assert dt < compute_dt(fig3_spec, reference_grid, config)
        assert "boundary flux limits" in caplog.text

    def test_interior_bound_rules_for_fig3(self, fig3_spec, reference_grid, caplog):
        with caplog.at_level(logging.WARNING, logger="src.fv_solver"):
            compute_dt(fig3_spec, reference_grid, SchemeConfig(flux=godunov(fig3_spec.f)))
        assert "boundary flux" not in caplog.text

    def test_invalid_config(self, fig3_spec):
        with pytest.raises(ConfigError):
            SchemeConfig(flux=godunov(fig3_spec.f), epsilon=-1.0)
        with pytest.raises(ConfigError):
            SchemeConfig(flux=godunov(fig3_spec.f), dt=0.0)


class TestRun:
    def test_fig3_stays_in_range(self, fig3_spec, reference_grid, reference_config):
        rec = run(fig3_spec, reference_grid, reference_config)
        assert abs(rec.steps - 6000) <= 1
        assert rec.snapshot_times[-1] == pytest.approx(0.12)
        for snap in rec.snapshots:
            assert snap.field.values.min() >= 0.0
            assert snap.field.values.max() <= 1.0

    def test_lands_on_snapshot_times(self, short, reference_grid, reference_config):
        config = replace(reference_config, snapshot_times=(0.001, 0.0025))
        rec = run(short, reference_grid, config)
        assert rec.snapshot_times == pytest.approx([0.0, 0.001, 0.0025, 0.004])
        assert sum(rec.step_dts) == pytest.approx(0.004)
        rec.snapshot_at(0.0025)

    def test_snapshot_every_step(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        assert len(rec.snapshots) == rec.steps + 1
        assert [s.step for s in rec.snapshots] == list(range(rec.steps + 1))

    def test_constant_state_loses_mass_through_both_ends(self, fig3_spec, reference_grid, reference_config):
        new = step(CellField.constant(reference_grid, 1.0), fig3_spec, reference_config)
        # f(1) = 0 and b(1) = φ(1) = 0.4: only the end cells move
        assert new.values[0] == pytest.approx(0.9992)
        assert new.values[-1] == pytest.approx(0.9992)
        np.testing.assert_allclose(new.values[1:-1], 1.0)
        assert new.mass == pytest.approx(1.0 - 0.8 * 2e-5, abs=1e-13)

    def test_step_matches_first_step_of_run(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        one = step(init_cells(short, reference_grid), short, reference_config)
        np.testing.assert_array_equal(one.values, rec.snapshots[1].field.values)

    def test_reproducible(self, short, reference_grid, reference_config):
        a = run(short, reference_grid, reference_config)
        b = run(short, reference_grid, reference_config)
        np.testing.assert_array_equal(a.final.values, b.final.values)

    def test_zero_flux_conserves_mass(self, zero_flux_spec, reference_grid, reference_config):
        spec = replace(zero_flux_spec, horizon=0.01)
        rec = run(spec, reference_grid, reference_config)
        np.testing.assert_allclose(rec.masses, rec.initial_mass, rtol=0, atol=1e-12)
        assert not np.any(rec.left_flux) and not np.any(rec.right_flux)

    def test_left_boundary_sign(self, fig3_spec, small_grid):
        spec = replace(fig3_spec, horizon=1e-3)
        start = CellField.constant(small_grid, 0.8)
        config = SchemeConfig(flux=godunov(spec.f))
        default = run(spec, small_grid, config, initial=start)
        literal = run(spec, small_grid, replace(config, paper_literal_left_boundary=True), initial=start)
        assert default.left_flux[0] == pytest.approx(-0.2)
        assert literal.left_flux[0] == pytest.approx(0.2)
        assert default.right_flux[0] == pytest.approx(0.2)

    def test_blow_up_is_reported(self, fig1_spec, small_grid):
        spec = replace(fig1_spec, horizon=500.0)
        config = SchemeConfig(flux=godunov(spec.f), dt=1.0)
        with np.errstate(all="ignore"):
            with pytest.raises(NonFiniteStateError) as info:
                run(spec, small_grid, config)
        assert info.value.step is not None

    def test_snapshot_outside_horizon(self, short, reference_grid, reference_config):
        with pytest.raises(ConfigError):
            run(short, reference_grid, replace(reference_config, snapshot_times=(1.0,)))

    def test_source_term_keeps_mass_balance(self, zero_flux_spec, small_grid):
        spec = replace(zero_flux_spec, horizon=0.01)
        g = CellField.constant(small_grid, 0.5)
        config = SchemeConfig(flux=godunov(spec.f))
        rec = run(spec, small_grid, config, initial=g, source=g)
        assert rec.with_source
        assert any(rec.source_mass)
        assert mass_balance_check(rec).passed

    def test_run_many(self, short, small_grid):
        config = SchemeConfig(flux=godunov(short.f))
        starts = [CellField.constant(small_grid, c) for c in (0.1, 0.5, 0.9)]
        recs = run_many(short, small_grid, config, starts)
        assert len(recs) == 3
        np.testing.assert_array_equal(recs[1].initial.values, starts[1].values)


class TestViscousRun:
    def test_zero_epsilon_is_a_plain_run(self, short, reference_grid, reference_config):
        a = viscous_run(short, reference_grid, reference_config)
        b = run(short, reference_grid, reference_config)
        np.testing.assert_array_equal(a.final.values, b.final.values)

    def test_needs_beta(self, fig2_spec, small_grid):
        config = SchemeConfig(flux=godunov(fig2_spec.f), epsilon=0.1)
        with pytest.raises(NoBetaError):
            viscous_run(fig2_spec, small_grid, config)

    def test_viscous_boundary_flux(self, short, small_grid):
        config = SchemeConfig(flux=godunov(short.f), epsilon=0.1)
        start = CellField.constant(small_grid, 0.5)
        rec = viscous_run(short, small_grid, config, initial=start)
        # b_eps(0.5) = φ_ε(0.5) = 0.05
        assert rec.right_flux[0] == pytest.approx(0.05)
        assert rec.epsilon == 0.1


class TestSchemeProperties:
    spec = replace(get_scenario("fig3").spec, horizon=0.01)
    grid = Grid(0.0, 1.0, 20)

    @given(seed=seeds)
    @settings(max_examples=20, deadline=None)
    def test_maximum_principle_on_random_data(self, seed):
        rng = np.random.default_rng(seed)
        spec, small_grid = self.spec, self.grid
        start = CellField(small_grid, rng.uniform(0.0, 1.0, small_grid.cells))
        rec = run(spec, small_grid, SchemeConfig(flux=godunov(spec.f)), initial=start)
        assert min(m[0] for m in rec.minima) >= -1e-12
        assert max(m[0] for m in rec.maxima) <= 1.0 + 1e-12

    @given(seed=seeds)
    @settings(max_examples=20, deadline=None)
    def test_l1_contraction_on_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        spec, small_grid = self.spec, self.grid
        config = SchemeConfig(flux=godunov(spec.f), snapshot_every=1)
        u0, v0 = (CellField(small_grid, rng.uniform(0.0, 1.0, small_grid.cells)) for _ in range(2))
        check = l1_contraction_check(run(spec, small_grid, config, initial=u0), run(spec, small_grid, config, initial=v0))
        assert check.passed, check

    @given(seed=seeds, bump=st.floats(min_value=1e-6, max_value=1.0))
    @settings(max_examples=30, deadline=None)
    def test_step_is_monotone(self, seed, bump):
        rng = np.random.default_rng(seed)
        spec, grid = self.spec, self.grid
        config = SchemeConfig(flux=godunov(spec.f))
        values = rng.uniform(0.0, 1.0, grid.cells)
        j = int(rng.integers(grid.cells))
        raised = values.copy()
        raised[j] = min(1.0, values[j] + bump)
        low = step(CellField(grid, values), spec, config)
        high = step(CellField(grid, raised), spec, config)
        assert np.all(high.values >= low.values - 1e-14)
