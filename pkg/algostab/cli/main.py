"""
CLI Tool for the Algorithm Stability Toolkit

Runs config-driven experiments and reports embedded assertion failures.

Exit codes: 0 pass, 2 assertion violations, 64 usage error, 74 I/O error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional, Tuple

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from algostab.errors import AlgostabError, ConfigError, ContractViolationError, HorizonNotFoundError, InputError
from algostab.experiments import ExperimentOutcome, execute, write_outputs
from algostab.reporting import load_config
from algostab.schema import ExperimentConfig, RunManifest

EXIT_OK = 0
EXIT_VIOLATIONS = 2
EXIT_USAGE = 64
EXIT_IO = 74

app = typer.Typer(help="Algorithm stability toolkit: converse Lyapunov checks and disturbance bounds")
console = Console()
err_console = Console(stderr=True)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=False)],
        force=True,
    )


def _load(config_path: str, seed: Optional[int], out: Optional[str], expected: Optional[str]) -> ExperimentConfig:
    config = load_config(config_path, {"seed": seed, "output_dir": out})
    if expected is not None and config.experiment != expected:
        raise ConfigError(
            f"this command runs '{expected}' configs",
            [f"experiment: got '{config.experiment}'"],
        )
    return config


def _run(
    config_path: str,
    seed: Optional[int],
    out: Optional[str],
    jobs: int,
    strict: bool,
    verbose: bool,
    expected: Optional[str] = None,
    quiet: bool = False,
) -> Tuple[ExperimentConfig, ExperimentOutcome, RunManifest]:
    """Load, execute and write; exits with the matching code on errors."""
    _configure_logging(verbose)
    status = err_console if quiet else console
    try:
        config = _load(config_path, seed, out, expected)
        status.print(f"[cyan]Running {config.experiment} (seed {config.seed})...[/cyan]")
        outcome = execute(config, jobs)
        manifest = write_outputs(config, outcome, strict)
    except ConfigError as e:
        err_console.print(f"[red]Error: {e}[/red]")
        for line in e.diagnostics:
            err_console.print(f"  {line}")
        sys.exit(EXIT_USAGE)
    except ValidationError as e:
        err_console.print(f"[red]Error: invalid configuration: {e}[/red]")
        sys.exit(EXIT_USAGE)
    except (InputError, ContractViolationError) as e:
        err_console.print(f"[red]Error: {e}[/red]")
        sys.exit(EXIT_USAGE)
    except HorizonNotFoundError as e:
        err_console.print(f"[red]Error: {e} ({e.to_dict()})[/red]")
        sys.exit(EXIT_VIOLATIONS)
    except OSError as e:
        err_console.print(f"[red]Error: {e}[/red]")
        sys.exit(EXIT_IO)
    except AlgostabError as e:
        err_console.print(f"[red]Error: {e}[/red]")
        sys.exit(EXIT_USAGE)
    return config, outcome, manifest


def _report(config: ExperimentConfig, outcome: ExperimentOutcome, manifest: RunManifest, quiet: bool = False) -> None:
    """Print the summary and exit with 2 when the run failed."""
    target = err_console if quiet else console
    if outcome.violations:
        target.print(f"\n[bold red]Violations ({len(outcome.violations)}):[/bold red]")
        table = Table(show_header=True, header_style="bold magenta")
        table.add_column("Check")
        table.add_column("k", justify="right")
        table.add_column("Excess", justify="right")
        for v in outcome.violations[:10]:  # Show first 10
            table.add_row(v.check, str(v.k), f"{v.excess:.6g}")
        target.print(table)
        if len(outcome.violations) > 10:
            target.print(f"\n[yellow]... and {len(outcome.violations) - 10} more violations[/yellow]")
    for warning in outcome.warnings:
        target.print(f"[yellow]Warning: {warning}[/yellow]")

    manifest_path = Path(config.output_dir) / "manifest.json"
    if manifest.passed:
        target.print(f"\n[green]✓ {config.experiment} passed. Manifest saved to {manifest_path}[/green]")
        return
    target.print(f"\n[red]✗ {config.experiment} failed. Manifest saved to {manifest_path}[/red]")
    sys.exit(EXIT_VIOLATIONS)


SEED = typer.Option(None, "--seed", "-s", help="Override the config seed")
OUT = typer.Option(None, "--out", "-o", help="Override the output directory")
JOBS = typer.Option(1, "--jobs", "-j", min=1, help="Worker threads for ensembles and sweeps")
STRICT = typer.Option(False, "--strict", help="Treat warnings as failures")
VERBOSE = typer.Option(False, "--verbose", "-v", help="Log experiment progress")


@app.command()
def run(
    config: str = typer.Argument(..., help="Experiment config (JSON)"),
    seed: Optional[int] = SEED,
    out: Optional[str] = OUT,
    jobs: int = JOBS,
    strict: bool = STRICT,
    verbose: bool = VERBOSE,
):
    """
    Run any configured experiment.

    Example:
        algostab run configs/bound_check.json --out results/bound_check
    """
    cfg, outcome, manifest = _run(config, seed, out, jobs, strict, verbose)
    _report(cfg, outcome, manifest)


@app.command("verify-bound")
def verify_bound(
    config: str = typer.Argument(..., help="bound_check config (JSON)"),
    seed: Optional[int] = SEED,
    out: Optional[str] = OUT,
    jobs: int = JOBS,
    strict: bool = STRICT,
    verbose: bool = VERBOSE,
):
    """
    Check simulated trajectories against the disturbance bounds.

    Example:
        algostab verify-bound configs/bound_check.json
    """
    cfg, outcome, manifest = _run(config, seed, out, jobs, strict, verbose, expected="bound_check")
    results = outcome.summary
    constants = results.get("constants", {})
    console.print("\n[bold]Bound Summary:[/bold]")
    for name in ("c0", "K", "L_V", "L_e", "d0"):
        if name in constants:
            console.print(f"  {name}: {constants[name]:.6g}")
    for name in ("final_error", "deterministic_bound_final", "steady_state_bound", "mean_final"):
        if name in results:
            console.print(f"  {name}: {results[name]:.6g}")
    _report(cfg, outcome, manifest)


@app.command("estimate-lyapunov")
def estimate_lyapunov(
    config: str = typer.Argument(..., help="lyapunov_audit config (JSON)"),
    seed: Optional[int] = SEED,
    out: Optional[str] = OUT,
    jobs: int = JOBS,
    strict: bool = STRICT,
    verbose: bool = VERBOSE,
):
    """
    Estimate K and L_V for each factory and print them as JSON.

    Example:
        algostab estimate-lyapunov configs/lyapunov_audit.json
    """
    cfg, outcome, manifest = _run(config, seed, out, jobs, strict, verbose, expected="lyapunov_audit", quiet=True)
    keys = ("algo", "K", "L_V_analytic", "L_V_empirical", "sandwich_max_violation", "decrease_max_violation")
    records = [{k: record[k] for k in keys} for record in outcome.summary["factories"]]
    typer.echo(json.dumps(records[0] if len(records) == 1 else records, indent=2, sort_keys=True))
    _report(cfg, outcome, manifest, quiet=True)


@app.command()
def sweep(
    config: str = typer.Argument(..., help="admm_tradeoff config (JSON)"),
    seed: Optional[int] = SEED,
    out: Optional[str] = OUT,
    jobs: int = JOBS,
    strict: bool = STRICT,
    verbose: bool = VERBOSE,
):
    """
    Sweep the event-trigger threshold of consensus ADMM.

    Example:
        algostab sweep configs/admm_tradeoff.json --jobs 4
    """
    cfg, outcome, manifest = _run(config, seed, out, jobs, strict, verbose, expected="admm_tradeoff")
    table = outcome.tables.get("admm_tradeoff")
    if table:
        rows = Table(show_header=True, header_style="bold magenta")
        for column in table:
            rows.add_column(column, justify="right")
        for i in range(len(table["delta"])):
            rows.add_row(*(f"{table[c][i]:.6g}" for c in table))
        console.print(rows)
    _report(cfg, outcome, manifest)


if __name__ == "__main__":
    app()
