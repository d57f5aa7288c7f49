"""CLI entry point for degenfv."""

import logging
import sys

import click
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .errors import ConfigError, DegenFVError
from .manifest import RunManifest, load_config
from .numflux import FLUX_NAMES
from .runner import EXIT_CONFIG, EXIT_DIAGNOSTIC, ExperimentRunner
from .scenarios import SCENARIOS

console = Console()
err_console = Console(stderr=True)

# Load environment variables
load_dotenv()


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def manifest_options(func):
    """Options shared by every command that sets up a problem."""
    options = [
        click.option('--scenario', '-s', help=f"Preset name ({', '.join(SCENARIOS)})"),
        click.option('--config', '-c', 'config_path', type=click.Path(), help='Path to a YAML manifest'),
        click.option('--out', '-o', type=click.Path(), help='Output directory (default: $DEGENFV_OUT or ./degenfv_results)'),
        click.option('--dx', type=float, help='Mesh width'),
        click.option('--cells', type=int, help='Number of cells (overrides --dx)'),
        click.option('--epsilon', type=float, help='Added viscosity ε (default: 0)'),
        click.option('--flux', type=click.Choice(FLUX_NAMES), help='Numerical flux (default: godunov)'),
        click.option('--dt', help="Time step: 'paper' (δx²/5), 'cfl' or a number"),
        click.option('--horizon', type=float, help='Final time T'),
        click.option('--paper-literal-left-boundary', is_flag=True,
                     help='Use +b(u₁) on the left face instead of -b(u₁)'),
        click.option('--verbose', '-v', is_flag=True, help='Debug logging'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _runner(options: dict) -> ExperimentRunner:
    _setup_logging(options.pop('verbose', False))
    for flag in ('paper_literal_left_boundary', 'gnuplot'):
        # unset flags leave the config file in charge
        if not options.get(flag):
            options[flag] = None
    config_data = load_config(options.get('config_path'))
    return ExperimentRunner(RunManifest.from_sources(options, config_data))


def _finish(outcome) -> None:
    failures = outcome.report.failures()
    for check in failures:
        err_console.print(f"[red]✗ check failed: {check.name} (magnitude {check.magnitude:.3e}, tol {check.tolerance:.1e})[/red]")
    if failures:
        sys.exit(EXIT_DIAGNOSTIC)
    console.print(f"[green]✓ Results saved to: {outcome.out_dir}[/green]")


def _fail(e: Exception) -> None:
    err_console.print(f"[red]✗ Error: {e}[/red]")
    sys.exit(EXIT_CONFIG if isinstance(e, ConfigError) else EXIT_DIAGNOSTIC)


@click.group()
@click.version_option(version=__version__)
def cli():
    """degenfv - finite volumes for degenerate parabolic-hyperbolic problems
    with nonlinear flux boundary conditions.

    Runs the preset experiments, stationary solves and parameter sweeps, and
    checks the scheme's structural properties as executable diagnostics.
    """
    pass


@cli.command()
@manifest_options
@click.option('--snapshot', 'snapshots', type=float, multiple=True, help='Snapshot time (repeatable)')
@click.option('--gnuplot', is_flag=True, help='Also write plot.gp')
def run(**options):
    """Time-march a preset or custom problem and run its diagnostics.

    Example:
        degenfv run --scenario fig3
        degenfv run --scenario fig1 --out results/fig1 --gnuplot
    """
    options['snapshots'] = options['snapshots'] or None
    try:
        runner = _runner(options)
        console.print(f"\n[bold blue]▶ Running {runner.resolved.name}[/bold blue]\n")
        outcome = runner.run()
    except DegenFVError as e:
        _fail(e)
    _finish(outcome)


@cli.command()
@manifest_options
@click.option('--g', 'g', help='Source: a constant or a CSV file with x,u columns (default: 1)')
@click.option('--refine', is_flag=True, help='Also solve on the refined grid and record the jump ratio')
@click.option('--tol', type=float, help='Residual tolerance (default: 1e-10·I)')
def stationary(refine, tol, **options):
    """Solve the stationary problem u + Φ(u)_x = g.

    Example:
        degenfv stationary --scenario fig3 --g 1 --refine
    """
    try:
        runner = _runner(options)
        console.print(f"\n[bold blue]▶ Stationary solve for {runner.resolved.name}[/bold blue]\n")
        outcome = runner.stationary(refine=refine, tol=tol)
    except DegenFVError as e:
        _fail(e)
    _finish(outcome)


@cli.command()
@manifest_options
@click.option('--parameter', '-p', type=click.Choice(['epsilon', 'dx']), required=True, help='Swept parameter')
@click.option('--values', required=True, help='Comma-separated values (e.g. "0.1,0.01,0.001")')
def sweep(parameter, values, **options):
    """Run one member per value and summarise the sweep.

    Example:
        degenfv sweep --scenario fig3 --parameter epsilon --values 0.1,0.01,0.001
        degenfv sweep --scenario fig3 --parameter dx --values 0.02,0.01,0.005
    """
    try:
        parsed = [float(v) for v in values.split(',') if v.strip()]
    except ValueError:
        _fail(ConfigError(f"cannot parse sweep values '{values}'"))
    try:
        runner = _runner(options)
        console.print(f"\n[bold blue]▶ Sweeping {parameter} over {len(parsed)} value(s)[/bold blue]\n")
        outcome = runner.sweep(parameter, parsed)
    except DegenFVError as e:
        _fail(e)
    _finish(outcome)


@cli.command()
@manifest_options
def check(**options):
    """Audit the problem data against the structural hypotheses (advisory).

    Example:
        degenfv check --scenario fig1
    """
    try:
        _runner(options).check()
    except DegenFVError as e:
        _fail(e)


@cli.command()
@manifest_options
@click.option('--seed', type=int, help='Random seed (default: $DEGENFV_SEED, else 0)')
@click.option('--pairs', type=int, default=20, help='Random pairs per property (default: 20)')
def verify(pairs, **options):
    """Seeded randomized property suite: L¹ contraction and resolvent accretivity.

    Example:
        degenfv verify --scenario fig3 --seed 7 --horizon 0.01
    """
    try:
        runner = _runner(options)
        console.print(f"\n[bold blue]▶ Property suite, seed {runner.manifest.seed}[/bold blue]\n")
        outcome = runner.verify(pairs=pairs)
    except DegenFVError as e:
        _fail(e)
    _finish(outcome)


@cli.command(name='list')
def list_scenarios():
    """List the preset scenarios.

    Example:
        degenfv list
    """
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Name", style="cyan")
    table.add_column("Description", style="white")
    table.add_column("Violates", style="yellow")
    table.add_column("Expected fail", style="red")

    for scenario in SCENARIOS.values():
        table.add_row(
            scenario.name,
            scenario.description,
            ", ".join(scenario.violated) or "-",
            ", ".join(sorted(scenario.expected_fail)) or "-",
        )

    console.print(table)
    console.print(f"\n[dim]{len(SCENARIOS)} preset(s)[/dim]\n")


if __name__ == '__main__':
    cli()
