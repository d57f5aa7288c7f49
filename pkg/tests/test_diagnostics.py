"""Diagnostics on solution records."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.diagnostics import (
    LAYER_THRESHOLD,
    CheckResult,
    DiagnosticsReport,
    boundary_condition_check,
    boundary_layer_indicator,
    distance_series,
    entropy_residual,
    integral_solution_check,
    l1_contraction_check,
    l1_distances,
    mass_balance_check,
    max_principle_scan,
    run_diagnostics,
    stationary_entropy_residual,
    viscous_estimates,
)
from src.errors import ConfigError, ConfigMismatchError, FluxMismatchError, NoBetaError
from src.fv_solver import CellField, Grid, SchemeConfig, run, viscous_run
from src.numflux import godunov, rusanov
from src.scenarios import get_scenario, reference_dt
from src.stationary import StationaryProblem, solve_stationary


class TestCheckResult:
    def test_expected_fail_inverts_the_criterion(self):
        reproduced = CheckResult("max_principle", False, 0.1, 1e-12, expected_fail=True)
        missed = CheckResult("max_principle", True, 0.0, 1e-12, expected_fail=True)
        assert reproduced.reproduced and reproduced.acceptable
        assert not missed.reproduced and missed.acceptable

    def test_report_failures(self):
        report = DiagnosticsReport()
        report.add(CheckResult("a", True, 0.0, 1.0))
        report.add(CheckResult("b", False, 2.0, 1.0))
        report.add(CheckResult("c", False, 2.0, 1.0, asserted=False))
        assert [c.name for c in report.failures()] == ["b"]
        assert not report.ok
        assert report["c"].magnitude == 2.0


class TestMaxPrinciple:
    def test_fig3_respects_bounds(self, fig3_spec, reference_grid, reference_config):
        check = max_principle_scan(run(fig3_spec, reference_grid, reference_config), 1.0)
        assert check.passed
        assert check.witness_step is None

    def test_saturated_fig1_exceeds_u_max_at_the_outflow(self, reference_grid, reference_config):
        spec = replace(get_scenario("fig1-saturated").spec, horizon=0.001)
        config = replace(reference_config, flux=godunov(spec.f))
        check = max_principle_scan(run(spec, reference_grid, config), 1.0)
        assert not check.passed
        assert check.witness_step == 1
        assert check.witness_cell == 100
        assert check.magnitude > 0.0

    def test_fig1_paper_data_stays_below_the_outflow_layer(self, fig1_spec, reference_grid, reference_config):
        config = replace(reference_config, flux=godunov(fig1_spec.f))
        rec = run(fig1_spec, reference_grid, config)
        check = max_principle_scan(rec, 1.0)
        # b(u) = f(0.7) at the outflow gives u = 0.845
        assert max(m[0] for m in rec.maxima) <= 0.845 + 1e-9
        assert check.passed


class TestMassBalance:
    def test_fig3(self, short, reference_grid, reference_config):
        check = mass_balance_check(run(short, reference_grid, reference_config))
        assert check.passed
        assert check.tolerance == pytest.approx(1e-11)


class TestEntropyResidual:
    def test_interior_inequalities_hold(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        result = entropy_residual(rec, short, reference_config.flux, np.linspace(0.0, 1.0, 11))
        assert result["interior"].passed
        assert not result["boundary"].asserted

    def test_flux_mismatch(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        with pytest.raises(FluxMismatchError):
            entropy_residual(rec, short, rusanov(short.f), [0.5])

    def test_needs_consecutive_snapshots(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, reference_config)
        with pytest.raises(ConfigError):
            entropy_residual(rec, short, reference_config.flux, [0.5])

    def test_k_out_of_range(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        with pytest.raises(ConfigError):
            entropy_residual(rec, short, reference_config.flux, [1.5])


class TestStationaryEntropyResidual:
    def test_unit_source_solution(self, fig3_spec, small_grid):
        prob = StationaryProblem.constant(fig3_spec, small_grid, 1.0)
        u, _ = solve_stationary(prob)
        result = stationary_entropy_residual(u, prob)
        assert result["interior"].passed, result["interior"]
        assert result["interior"].witness_cell is None
        # b = φ is non-decreasing, so the boundary cells satisfy it too
        assert result["boundary"].passed
        assert not result["boundary"].asserted

    def test_rusanov_solution(self, fig3_spec, small_grid):
        prob = StationaryProblem.constant(fig3_spec, small_grid, 0.8)
        flux = rusanov(fig3_spec.f)
        u, _ = solve_stationary(prob, flux=flux)
        assert stationary_entropy_residual(u, prob, flux=flux)["interior"].passed

    def test_k_out_of_range(self, fig3_spec, small_grid):
        prob = StationaryProblem.constant(fig3_spec, small_grid, 1.0)
        with pytest.raises(ConfigError):
            stationary_entropy_residual(CellField.constant(small_grid, 0.5), prob, k_grid=[1.5])

    def test_grid_mismatch(self, fig3_spec, small_grid):
        prob = StationaryProblem.constant(fig3_spec, small_grid, 1.0)
        with pytest.raises(ConfigMismatchError):
            stationary_entropy_residual(CellField.constant(small_grid.refine(), 0.5), prob)


class TestL1Contraction:
    def test_step_data_against_constant(self, short, small_grid):
        config = SchemeConfig(flux=godunov(short.f), snapshot_every=1)
        a = run(short, small_grid, config)
        b = run(short, small_grid, config, initial=CellField.constant(small_grid, 0.3))
        distances = l1_distances(a, b)
        assert np.all(np.diff(distances) <= 1e-12)
        assert l1_contraction_check(a, b).passed

    def test_mismatched_records(self, short, small_grid):
        config = SchemeConfig(flux=godunov(short.f))
        a = run(short, small_grid, config)
        b = run(short, small_grid.refine(), config)
        with pytest.raises(ConfigMismatchError):
            l1_contraction_check(a, b)


class TestIntegralSolution:
    def test_one_step_from_the_stationary_state(self, fig3_spec, small_grid):
        g = CellField.constant(small_grid, 0.5)
        u_stat, _ = solve_stationary(StationaryProblem(fig3_spec, g))
        config = SchemeConfig(flux=godunov(fig3_spec.f), snapshot_every=1)
        dt = 1e-4
        spec = replace(fig3_spec, horizon=dt)
        rec = run(spec, small_grid, replace(config, dt=dt), initial=u_stat)
        distances = distance_series(rec, u_stat)
        assert distances[0] == 0.0
        check = integral_solution_check(rec, u_stat, g)
        assert check.passed, check

    def test_fig3_run_against_the_stationary_state(self, fig3_spec, reference_grid, reference_config):
        g = CellField.constant(reference_grid, 0.5)
        u_stat, _ = solve_stationary(StationaryProblem(fig3_spec, g))
        rec = run(fig3_spec, reference_grid, replace(reference_config, snapshot_every=1))
        check = integral_solution_check(rec, u_stat, g)
        assert check.passed, check
        assert check.witness_step is None

    def test_grid_mismatch(self, fig3_spec, small_grid):
        g = CellField.constant(small_grid.refine(), 0.5)
        rec = run(replace(fig3_spec, horizon=1e-3), small_grid, SchemeConfig(flux=godunov(fig3_spec.f)))
        with pytest.raises(ConfigMismatchError):
            integral_solution_check(rec, g, g)


class TestBoundaryLayer:
    def test_constant_field(self, small_grid):
        assert boundary_layer_indicator(CellField.constant(small_grid, 0.4)) == 1.0

    def test_linear_field(self, small_grid):
        field = CellField(small_grid, small_grid.centers)
        assert boundary_layer_indicator(field) == pytest.approx(1.0)

    def test_jump_in_the_last_cell(self, small_grid):
        values = np.zeros(small_grid.cells)
        values[-1] = 1.0
        field = CellField(small_grid, values)
        assert boundary_layer_indicator(field) == pytest.approx(20.0)
        assert boundary_layer_indicator(field, side="left") == 0.0
        check = boundary_condition_check(field)
        assert not check.passed
        assert check.witness_cell == small_grid.cells - 1

    def test_invalid_width(self, small_grid):
        with pytest.raises(ConfigError):
            boundary_layer_indicator(CellField.constant(small_grid, 0.4), width=10)

    def test_invalid_side(self, small_grid):
        with pytest.raises(ConfigError):
            boundary_layer_indicator(CellField.constant(small_grid, 0.4), side="top")


    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        amplitude=st.floats(min_value=1e-2, max_value=1e2),
        offset=st.floats(min_value=-1.0, max_value=1.0),
        length=st.floats(min_value=0.1, max_value=10.0),
    )
    @settings(max_examples=30, deadline=None)
    def test_indicator_ignores_scale_and_offset(self, seed, amplitude, offset, length):
        values = np.random.default_rng(seed).uniform(0.0, 1.0, 24)
        unit = CellField(Grid(0.0, 1.0, 24), values)
        stretched = CellField(Grid(0.0, length, 24), amplitude * values + offset)
        for side in ("left", "right", "both"):
            assert boundary_layer_indicator(stretched, side=side) == pytest.approx(
                boundary_layer_indicator(unit, side=side), rel=1e-6
            )

    @pytest.mark.parametrize("cells", [100, 200])
    def test_fig2_outflow_layer(self, fig2_spec, cells):
        grid = Grid(0.0, 1.0, cells)
        rec = run(fig2_spec, grid, SchemeConfig(flux=godunov(fig2_spec.f), dt=reference_dt(grid.dx)))
        assert boundary_layer_indicator(rec.final, 2, side="right") >= LAYER_THRESHOLD

    def test_fig2_layer_sharpens_with_the_grid(self, fig2_spec):
        indicators = []
        for cells in (100, 200):
            grid = Grid(0.0, 1.0, cells)
            rec = run(fig2_spec, grid, SchemeConfig(flux=godunov(fig2_spec.f), dt=reference_dt(grid.dx)))
            indicators.append(boundary_layer_indicator(rec.final, 2, side="right"))
        # the jump stays while δx shrinks
        assert indicators[1] > 1.5 * indicators[0]

    def test_fig3_has_no_layer_on_either_grid(self, fig3_spec):
        indicators = []
        for cells in (100, 200):
            grid = Grid(0.0, 1.0, cells)
            rec = run(fig3_spec, grid, SchemeConfig(flux=godunov(fig3_spec.f), dt=reference_dt(grid.dx)))
            indicators.append(boundary_layer_indicator(rec.final, 2, side="right"))
        assert max(indicators) <= LAYER_THRESHOLD
        assert indicators[1] == pytest.approx(indicators[0], rel=0.25)


class TestViscousEstimates:
    def test_norms_for_each_epsilon(self, short, small_grid):
        recs = {}
        for eps in (0.1, 0.05):
            config = SchemeConfig(flux=godunov(short.f), epsilon=eps, snapshot_every=1)
            recs[eps] = viscous_run(short, small_grid, config)
        result = viscous_estimates(recs, short)
        assert [n.epsilon for n in result["norms"]] == [0.1, 0.05]
        assert set(result["checks"]) == {"estimate_gradient", "estimate_phi_h1", "estimate_boundary"}
        assert all(n.phi_h1 > 0.0 for n in result["norms"])

    def test_needs_two_values(self, short, small_grid):
        rec = viscous_run(short, small_grid, SchemeConfig(flux=godunov(short.f), epsilon=0.1))
        with pytest.raises(ConfigError):
            viscous_estimates({0.1: rec}, short)

    def test_needs_beta(self, fig2_spec, short, small_grid):
        rec = viscous_run(short, small_grid, SchemeConfig(flux=godunov(short.f), epsilon=0.1))
        with pytest.raises(NoBetaError):
            viscous_estimates({0.1: rec, 0.05: rec}, fig2_spec)


class TestVanishingViscosity:
    def test_distance_to_the_inviscid_run_shrinks(self, fig3_spec, reference_grid, reference_config):
        config = replace(reference_config, snapshot_every=1)
        baseline = run(fig3_spec, reference_grid, config)
        recs = {eps: viscous_run(fig3_spec, reference_grid, replace(config, epsilon=eps)) for eps in (1e-1, 1e-2, 1e-3, 1e-4)}
        distances = [recs[eps].final.l1_distance(baseline.final) for eps in sorted(recs, reverse=True)]
        for larger, smaller in zip(distances, distances[1:]):
            assert smaller <= 1.1 * larger
        assert distances[-1] < 0.01 * distances[0]
        checks = viscous_estimates(recs, fig3_spec)["checks"]
        assert all(check.passed for check in checks.values()), checks

    def test_cauchy_differences_decrease_with_dx(self, fig3_spec):
        finals = []
        for dx in (0.02, 0.01, 0.005):
            grid = Grid.from_dx(0.0, 1.0, dx)
            rec = run(fig3_spec, grid, SchemeConfig(flux=godunov(fig3_spec.f), dt=reference_dt(grid.dx)))
            finals.append(rec.final)
        differences = [coarse.l1_distance(fine.coarsen()) for coarse, fine in zip(finals, finals[1:])]
        assert differences[1] < differences[0]


class TestRunDiagnostics:
    def test_fig3_report(self, short, reference_grid, reference_config):
        rec = run(short, reference_grid, replace(reference_config, snapshot_every=1))
        report = run_diagnostics(rec, short, reference_config.flux)
        names = [c.name for c in report.checks]
        assert names == ["max_principle", "mass_balance", "entropy_interior", "entropy_boundary", "boundary_condition"]
        assert report.ok, report.failures()

    def test_expected_fail_is_marked(self, reference_grid, reference_config):
        scenario = get_scenario("fig1-saturated")
        spec = replace(scenario.spec, horizon=0.001)
        config = replace(reference_config, flux=godunov(spec.f))
        report = run_diagnostics(run(spec, reference_grid, config), spec, config.flux, expected_fail=sorted(scenario.expected_fail))
        check = report["max_principle"]
        assert check.expected_fail and check.reproduced
        assert report.ok

    def test_without_step_snapshots_entropy_is_skipped(self, short, reference_grid, reference_config):
        report = run_diagnostics(run(short, reference_grid, reference_config), short, reference_config.flux)
        assert "entropy_interior" not in [c.name for c in report.checks]
