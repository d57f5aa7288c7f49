"""Experiment orchestration behind the CLI commands."""

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn

from .diagnostics import (
    CheckResult,
    DiagnosticsReport,
    l1_contraction_check,
    run_diagnostics,
    stationary_entropy_residual,
    viscous_estimates,
)
from .errors import ConfigError
from .fv_solver import CellField, Grid, SolutionRecord, run, viscous_run
from .manifest import ResolvedRun, RunManifest, resolve
from .output import OutputFormatter, write_record
from .problem import HypothesisReport, hypothesis_report
from .scenarios import reference_dt
from .stationary import (
    StationaryProblem,
    flux_regularity_report,
    mass_defect,
    refinement_ratio,
    resolvent,
    solve_stationary,
)

console = Console()
log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSTIC = 1
EXIT_CONFIG = 2
DISTANCE_SLACK = 1.10
VERIFY_PAIRS = 20
VERIFY_LAMBDAS = (0.01, 0.1, 1.0)


@dataclass
class Outcome:
    exit_code: int
    out_dir: Path
    report: DiagnosticsReport


class ExperimentRunner:
    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self.resolved: ResolvedRun = resolve(manifest)
        self.out_dir = Path(manifest.out)

    def _progress(self) -> Progress:
        return Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console)

    def _time_run(self, resolved: ResolvedRun, every: int = 1) -> SolutionRecord:
        config = replace(resolved.config, snapshot_every=every)
        if config.epsilon > 0:
            return viscous_run(resolved.spec, resolved.grid, config)
        return run(resolved.spec, resolved.grid, config)

    def run(self) -> Outcome:
        r = self.resolved
        with self._progress() as progress:
            task1 = progress.add_task("Checking hypotheses...", total=None)
            hypotheses = hypothesis_report(r.spec)
            progress.update(task1, completed=True)

            task2 = progress.add_task(f"Time stepping {r.name} on {r.grid.cells} cells...", total=None)
            rec = self._time_run(r)
            log.info("%s: %d steps, dt = %.3g, final mass %.6g", r.name, rec.steps, rec.dt, rec.masses[-1] if rec.steps else rec.initial_mass)
            progress.update(task2, completed=True)

            task3 = progress.add_task("Running diagnostics...", total=None)
            report = run_diagnostics(rec, r.spec, r.config.flux, expected_fail=sorted(r.expected_fail))
            progress.update(task3, completed=True)

            task4 = progress.add_task("Writing results...", total=None)
            names = write_record(rec, self.out_dir, times=list(r.config.snapshot_times) + [r.spec.horizon])
            OutputFormatter.save_to_file(OutputFormatter.diagnostics_csv(report), self.out_dir / "diagnostics.csv")
            notes = self._run_notes(r, rec, hypotheses)
            OutputFormatter.save_to_file(
                OutputFormatter.format_summary(f"Run {r.name}", report, notes), self.out_dir / "summary.txt"
            )
            if self.manifest.gnuplot:
                OutputFormatter.save_to_file(OutputFormatter.gnuplot_script(names, r.name), self.out_dir / "plot.gp")
            progress.update(task4, completed=True)

        console.print(OutputFormatter.checks_table(report.checks, title=f"Diagnostics: {r.name}"))
        self._display_summary(r.name, report, notes)
        return Outcome(EXIT_OK if report.ok else EXIT_DIAGNOSTIC, self.out_dir, report)

    @staticmethod
    def _run_notes(r: ResolvedRun, rec: SolutionRecord, hypotheses: HypothesisReport) -> List[str]:
        notes = [
            f"grid: {r.grid.cells} cells, dx = {r.grid.dx:g}",
            f"dt = {rec.dt:.6g}, steps = {rec.steps}, flux = {rec.flux_name}, epsilon = {rec.epsilon:g}",
            "hypotheses: " + ", ".join(f"{c.name} {'pass' if c.passed else 'fail'}" for c in hypotheses.checks),
        ]
        if r.config.paper_literal_left_boundary:
            notes.append("left boundary: paper-literal sign (mass enters at x = a)")
        if r.scenario and r.scenario.violated:
            notes.append(f"scenario violates {', '.join(r.scenario.violated)} on purpose")
        return notes

    def _display_summary(self, name: str, report: DiagnosticsReport, notes: Sequence[str]) -> None:
        failures = report.failures()
        body = "\n".join(notes) + f"\n\nResults in: {self.out_dir}"
        if failures:
            console.print(Panel(body, title=f"[red]✗ {name}: {len(failures)} check(s) failed[/red]", border_style="red"))
        else:
            console.print(Panel(body, title=f"[green]✓ {name}: all checks acceptable[/green]", border_style="green"))

    def _source(self, grid: Grid) -> CellField:
        g = self.manifest.g
        if g is None:
            g = 1.0
        if isinstance(g, (int, float)):
            return CellField.constant(grid, float(g))
        path = Path(str(g))
        if not path.exists():
            try:
                return CellField.constant(grid, float(g))
            except ValueError:
                raise ConfigError(f"g must be a number or a CSV file with x,u columns, got {g!r}")
        with open(path, newline="") as f:
            values = [float(row["u"]) for row in csv.DictReader(f)]
        if len(values) != grid.cells:
            raise ConfigError(f"{path} has {len(values)} rows, the grid has {grid.cells} cells")
        return CellField(grid, np.array(values))

    def stationary(self, refine: bool = False, tol: Optional[float] = None) -> Outcome:
        r = self.resolved
        grids = [r.grid, r.grid.refine()] if refine else [r.grid]
        reports, solutions, problems = [], [], []
        with self._progress() as progress:
            for grid in grids:
                task = progress.add_task(f"Solving (S) on {grid.cells} cells...", total=None)
                prob = StationaryProblem(r.spec, self._source(grid))
                u, profile = solve_stationary(prob, tol=tol, flux=r.config.flux)
                reports.append(flux_regularity_report(profile, u, prob))
                solutions.append((u, profile))
                problems.append(prob)
                progress.update(task, completed=True)

        u, profile = solutions[0]
        ratio = refinement_ratio(reports[0], reports[-1]) if refine else None
        OutputFormatter.save_to_file(OutputFormatter.field_csv(u), self.out_dir / "stationary.csv")
        OutputFormatter.save_to_file(OutputFormatter.face_flux_csv(profile), self.out_dir / "face_flux.csv")
        OutputFormatter.save_to_file(
            OutputFormatter.flux_regularity_csv(reports, [g.cells for g in grids], ratio),
            self.out_dir / "flux_regularity.csv",
        )
        report = DiagnosticsReport()
        target = tol or 1e-10 * r.grid.cells
        report.add(CheckResult("stationary_residual", profile.residual <= target, profile.residual, target))
        boundary = max(reports[0].left_residual, reports[0].right_residual)
        report.add(CheckResult("boundary_flux_residual", boundary == 0.0, boundary, 0.0))
        defect = mass_defect(u, problems[0])
        report.add(CheckResult("stationary_mass", defect <= target, defect, target))
        report.add(stationary_entropy_residual(u, problems[0], flux=r.config.flux)["interior"])
        if ratio is not None:
            report.add(CheckResult("jump_refinement_ratio", ratio <= 0.6, ratio, 0.6, asserted=False))
        console.print(OutputFormatter.checks_table(report.checks, title="Stationary problem"))
        self._display_summary("stationary", report, [f"iterations: {profile.iterations}", f"max face jump: {reports[0].max_jump:.3e}"])
        return Outcome(EXIT_OK if report.ok else EXIT_DIAGNOSTIC, self.out_dir, report)

    def sweep(self, parameter: str, values: Sequence[float]) -> Outcome:
        if len(values) < 2:
            raise ConfigError("a sweep needs at least two values")
        if parameter == "epsilon":
            return self._sweep_epsilon(values)
        if parameter == "dx":
            return self._sweep_dx(values)
        raise ConfigError(f"unknown sweep parameter '{parameter}'")

    def _sweep_epsilon(self, values: Sequence[float]) -> Outcome:
        r = self.resolved
        values = sorted((float(v) for v in values), reverse=True)
        if any(v <= 0 for v in values):
            raise ConfigError("epsilon sweep values must be positive")
        records: Dict[float, SolutionRecord] = {}
        with self._progress() as progress:
            task = progress.add_task("Baseline run (epsilon = 0)...", total=None)
            baseline = self._time_run(replace(r, config=replace(r.config, epsilon=0.0)))
            progress.update(task, completed=True)
            for eps in values:
                task = progress.add_task(f"Viscous run epsilon = {eps:g}...", total=None)
                member = replace(r, config=replace(r.config, epsilon=eps))
                records[eps] = self._time_run(member)
                write_record(records[eps], self.out_dir / f"epsilon_{eps:g}", times=[r.spec.horizon])
                progress.update(task, completed=True)

        estimates = viscous_estimates(records, r.spec)
        distances = [records[eps].final.l1_distance(baseline.final) for eps in values]
        rows = [
            (eps, d, n.gradient, n.phi_h1, n.boundary_l1)
            for eps, d, n in zip(values, distances, estimates["norms"])
        ]
        OutputFormatter.save_to_file(
            OutputFormatter.rows_to_csv(("epsilon", "l1_to_inviscid", "estimate_gradient", "estimate_phi_h1", "estimate_boundary"), rows),
            self.out_dir / "sweep_summary.csv",
        )
        report = DiagnosticsReport()
        growth = max(d1 / d0 if d0 > 0 else (np.inf if d1 > 0 else 0.0) for d0, d1 in zip(distances, distances[1:]))
        report.add(CheckResult("vanishing_viscosity", growth <= DISTANCE_SLACK, float(growth), DISTANCE_SLACK))
        for check in estimates["checks"].values():
            report.add(check)
        console.print(OutputFormatter.checks_table(report.checks, title="Epsilon sweep"))
        return Outcome(EXIT_OK if report.ok else EXIT_DIAGNOSTIC, self.out_dir, report)

    def _sweep_dx(self, values: Sequence[float]) -> Outcome:
        r = self.resolved
        values = sorted((float(v) for v in values), reverse=True)
        a, b_end = r.spec.domain
        finals: List[CellField] = []
        with self._progress() as progress:
            for dx in values:
                task = progress.add_task(f"Run dx = {dx:g}...", total=None)
                grid = Grid.from_dx(a, b_end, dx)
                dt = reference_dt(grid.dx) if self.manifest.dt in (None, "paper") else r.config.dt
                member = replace(r, grid=grid, config=replace(r.config, dt=dt))
                rec = self._time_run(member, every=0)
                write_record(rec, self.out_dir / f"dx_{dx:g}", times=[r.spec.horizon])
                finals.append(rec.final)
                progress.update(task, completed=True)

        for coarse, fine in zip(finals, finals[1:]):
            if fine.grid.cells != 2 * coarse.grid.cells:
                log.debug("dx sweep: %d cells followed by %d", coarse.grid.cells, fine.grid.cells)
                raise ConfigError("dx sweep values must halve from one to the next")
        differences = [coarse.l1_distance(fine.coarsen()) for coarse, fine in zip(finals, finals[1:])]
        rows = [(dx, f.grid.cells, d) for dx, f, d in zip(values, finals, differences + [None])]
        OutputFormatter.save_to_file(
            OutputFormatter.rows_to_csv(("dx", "cells", "l1_to_next_finer"), rows),
            self.out_dir / "sweep_summary.csv",
        )
        report = DiagnosticsReport()
        if len(differences) >= 2:
            ratio = max(d1 / d0 for d0, d1 in zip(differences, differences[1:]))
            report.add(CheckResult("grid_convergence", ratio < 1.0, float(ratio), 1.0))
        else:
            report.add(CheckResult("grid_convergence", True, differences[0], 0.0, asserted=False,
                                   detail="two grids: difference reported only"))
        console.print(OutputFormatter.checks_table(report.checks, title="Grid sweep"))
        return Outcome(EXIT_OK if report.ok else EXIT_DIAGNOSTIC, self.out_dir, report)

    def check(self) -> HypothesisReport:
        report = hypothesis_report(self.resolved.spec)
        console.print(OutputFormatter.hypothesis_table(report, title=f"Hypotheses: {self.resolved.name}"))
        return report

    def verify(self, pairs: int = VERIFY_PAIRS, resolvent_cells: int = 20) -> Outcome:
        """Seeded randomized suite: L¹ contraction of run pairs and resolvent accretivity."""
        r = self.resolved
        rng = np.random.default_rng(self.manifest.seed)
        report = DiagnosticsReport()
        config = replace(r.config, snapshot_every=1)
        u_max = r.spec.u_max

        worst = None
        with self._progress() as progress:
            task = progress.add_task(f"L1 contraction on {pairs} random pairs...", total=None)
            for _ in range(pairs):
                u0, v0 = (CellField(r.grid, rng.uniform(0.0, u_max, r.grid.cells)) for _ in range(2))
                check = l1_contraction_check(
                    run(r.spec, r.grid, config, initial=u0), run(r.spec, r.grid, config, initial=v0)
                )
                if worst is None or check.magnitude > worst.magnitude:
                    worst = check
            progress.update(task, completed=True)
            report.add(worst)

            grid = Grid(*r.spec.domain, resolvent_cells)
            tol = 1e-10 * grid.cells
            for lam in VERIFY_LAMBDAS:
                task = progress.add_task(f"Resolvent accretivity, lambda = {lam:g}...", total=None)
                excess = 0.0
                for _ in range(pairs):
                    w, w_hat = (CellField(grid, rng.uniform(0.0, u_max, grid.cells)) for _ in range(2))
                    u = resolvent(lam, w, r.spec, tol=tol, flux=r.config.flux)
                    u_hat = resolvent(lam, w_hat, r.spec, tol=tol, flux=r.config.flux)
                    excess = max(excess, u.l1_distance(u_hat) - w.l1_distance(w_hat))
                report.add(CheckResult(f"resolvent_accretive_{lam:g}", excess <= 10 * tol, max(excess, 0.0), 10 * tol))
                progress.update(task, completed=True)

        OutputFormatter.save_to_file(OutputFormatter.diagnostics_csv(report), self.out_dir / "verify.csv")
        console.print(OutputFormatter.checks_table(report.checks, title=f"Property suite (seed {self.manifest.seed})"))
        return Outcome(EXIT_OK if report.ok else EXIT_DIAGNOSTIC, self.out_dir, report)
