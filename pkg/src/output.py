"""Output formatting for run results: CSV exports, text summaries, tables."""

import csv
import io
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

from rich.table import Table

from .diagnostics import CheckResult, DiagnosticsReport
from .fv_solver import CellField, SolutionRecord
from .problem import HypothesisReport
from .stationary import FaceFluxProfile, FluxRegularity


def _num(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class OutputFormatter:
    """Format and write run results."""

    @staticmethod
    def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])
        return buffer.getvalue()

    @staticmethod
    def field_csv(field: CellField) -> str:
        """``x,u`` at cell centres."""
        return OutputFormatter.rows_to_csv(("x", "u"), zip(field.grid.centers.tolist(), field.values.tolist()))

    @staticmethod
    def runlog_csv(rec: SolutionRecord) -> str:
        rows = [(0, 0.0, rec.initial_mass, None, None)]
        rows += [
            (n + 1, rec.times[n], rec.masses[n], rec.left_flux[n], rec.right_flux[n])
            for n in range(rec.steps)
        ]
        return OutputFormatter.rows_to_csv(("step", "time", "mass", "left_flux", "right_flux"), rows)

    @staticmethod
    def diagnostics_csv(report: DiagnosticsReport) -> str:
        rows = [
            (c.name, c.reproduced if c.expected_fail else c.passed, c.magnitude, c.tolerance, c.witness_step, c.witness_cell)
            for c in report.checks
        ]
        return OutputFormatter.rows_to_csv(
            ("check", "pass", "magnitude", "tolerance", "witness_step", "witness_cell"), rows
        )

    @staticmethod
    def face_flux_csv(profile: FaceFluxProfile) -> str:
        return OutputFormatter.rows_to_csv(("x_face", "flux"), zip(profile.faces.tolist(), profile.values.tolist()))

    @staticmethod
    def flux_regularity_csv(reports: Sequence[FluxRegularity], cells: Sequence[int], ratio: Optional[float] = None) -> str:
        rows = [
            (i, r.max_jump, r.jump_face, r.left_residual, r.right_residual, ratio if k == len(reports) - 1 else None)
            for k, (i, r) in enumerate(zip(cells, reports))
        ]
        return OutputFormatter.rows_to_csv(
            ("cells", "max_jump", "jump_face", "left_residual", "right_residual", "jump_ratio"), rows
        )

    @staticmethod
    def snapshot_name(time: float) -> str:
        return f"solution_{time:.6f}.csv"

    @staticmethod
    def format_summary(title: str, report: DiagnosticsReport, notes: Sequence[str] = ()) -> str:
        """Human-readable text summary of a diagnostics report."""
        lines = [f"# {title}", f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}", ""]
        lines.extend(notes)
        if notes:
            lines.append("")
        for c in report.checks:
            if not c.asserted:
                status = "info"
            elif c.expected_fail:
                status = "expected-fail " + ("reproduced" if c.reproduced else "NOT REPRODUCED")
            else:
                status = "ok" if c.passed else "FAIL"
            where = ""
            if c.witness_step is not None or c.witness_cell is not None:
                where = f" at step {c.witness_step}, cell {c.witness_cell}"
            lines.append(f"- {c.name}: {status} (magnitude {c.magnitude:.3e}, tol {c.tolerance:.1e}){where}")
            if c.detail:
                lines.append(f"    {c.detail}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def gnuplot_script(snapshot_files: Sequence[str], title: str) -> str:
        plots = ", \\\n     ".join(
            f"'{name}' using 1:2 with lines title '{Path(name).stem.replace('solution_', 't=')}'"
            for name in snapshot_files
        )
        return "\n".join([
            "set datafile separator ','",
            "set key autotitle columnhead",
            f"set title '{title}'",
            "set xlabel 'x'",
            "set ylabel 'u'",
            f"plot {plots}",
            "",
        ])

    @staticmethod
    def save_to_file(content: str, output_path) -> None:
        """
        Save content to file.

        Args:
            content: Content to save
            output_path: Path to output file
        """
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)

    @staticmethod
    def checks_table(checks: Iterable[CheckResult], title: str = "Diagnostics") -> Table:
        table = Table(title=title, show_header=True, header_style="bold magenta")
        table.add_column("Check", style="cyan")
        table.add_column("Status", style="white")
        table.add_column("Magnitude", justify="right")
        table.add_column("Tolerance", justify="right")
        table.add_column("Witness", style="dim")
        for c in checks:
            if not c.asserted:
                status = "[dim]info[/dim]"
            elif c.expected_fail:
                status = "[green]✓ expected fail[/green]" if c.reproduced else "[yellow]⚠ expected fail not reproduced[/yellow]"
            else:
                status = "[green]✓ pass[/green]" if c.passed else "[red]✗ fail[/red]"
            witness = ""
            if c.witness_step is not None or c.witness_cell is not None:
                witness = f"step {c.witness_step}, cell {c.witness_cell}"
            table.add_row(c.name, status, f"{c.magnitude:.3e}", f"{c.tolerance:.1e}", witness)
        return table

    @staticmethod
    def hypothesis_table(report: HypothesisReport, title: str) -> Table:
        table = Table(title=title, show_header=True, header_style="bold magenta")
        table.add_column("Hypothesis", style="cyan")
        table.add_column("Status", style="white")
        table.add_column("Evidence", style="white")
        for check in report.checks:
            status = "[green]✓ pass[/green]" if check.passed else "[red]✗ fail[/red]"
            evidence = ", ".join(f"{k} = {v:.6g}" for k, v in check.evidence.items())
            if check.detail:
                evidence = f"{evidence}; {check.detail}" if evidence else check.detail
            table.add_row(check.name, status, evidence)
        return table


def write_record(rec: SolutionRecord, out_dir: Path, times: Optional[Sequence[float]] = None) -> List[str]:
    """Write ``solution_<time>.csv`` per snapshot and ``runlog.csv``; return snapshot names.

    With ``times`` given, only snapshots at those times (plus t = 0) are written.
    """
    wanted = None if times is None else {round(t, 12) for t in times} | {0.0}
    names = []
    for snap in rec.snapshots:
        if wanted is not None and round(snap.time, 12) not in wanted:
            continue
        name = OutputFormatter.snapshot_name(snap.time)
        if name in names:
            continue
        OutputFormatter.save_to_file(OutputFormatter.field_csv(snap.field), out_dir / name)
        names.append(name)
    OutputFormatter.save_to_file(OutputFormatter.runlog_csv(rec), out_dir / "runlog.csv")
    return names
