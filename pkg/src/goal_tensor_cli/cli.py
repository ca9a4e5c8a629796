"""Command Line Interface for goal-oriented tensor decompositions.

Platone: Semplicità d'uso, un sottocomando per ogni operazione.

Regola: nessuna numerica qui, solo parsing delle opzioni, chiamate ai service e
rendering con rich. Codici di uscita: 0 successo, 2 input non valido, 3 errore numerico.
"""

import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import typer
from rich.console import Console
from rich.table import Table

from goal_tensor_cli.adapters.config_file import (
    build_qoi_specs,
    build_run_config,
    build_sweep_settings,
    build_synth_spec,
    merge_overrides,
    read_config_file,
    resolve_config_path,
)
from goal_tensor_cli.adapters.report_writer import (
    emit_classic_report,
    emit_qoi_values,
    emit_report,
    emit_sweep,
)
from goal_tensor_cli.adapters.tensor_io import write_tensor
from goal_tensor_cli.core.errors import (
    ConfigError,
    FileSystemError,
    GoalTensorError,
    NumericError,
    TensorFormatError,
    ValidationError,
)
from goal_tensor_cli.core.models import ClassicReport, RunReport, SweepReport
from goal_tensor_cli.core.services import GoalPipelineService, synth_generate

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

app = typer.Typer(help="Goal-oriented CP and Tucker decompositions of simulation tensors")
console = Console()

EXIT_INVALID = 2
EXIT_NUMERIC = 3

ConfigOption = typer.Option(
    None, "--config", "-c", help="Config file (default: $GOAL_TENSOR_CONFIG)"
)
VerboseOption = typer.Option(False, "--verbose", "-v", help="Log per-iteration progress")
QuietOption = typer.Option(False, "--quiet", "-q", help="Only log warnings and errors")
SeedOption = typer.Option(None, "--seed", help="Random seed")
DataSeedOption = typer.Option(None, "--seed", help="Seed of the synthetic data (synth.seed)")
OutOption = typer.Option(None, "--out", "-o", help="Output directory for report files")


def _configure_logging(verbose: bool, quiet: bool) -> None:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif quiet:
        logging.getLogger().setLevel(logging.WARNING)


def _run_guarded(action: Callable[[], None]) -> None:
    """Esegue un comando mappando gli errori sui codici di uscita."""
    try:
        action()
    except NumericError as e:
        console.print(f"[bold red]Numeric Error:[/bold red] {e}")
        sys.exit(EXIT_NUMERIC)
    except TensorFormatError as e:
        console.print(f"[bold red]Tensor Format Error:[/bold red] {e}")
        sys.exit(EXIT_INVALID)
    except FileSystemError as e:
        console.print(f"[bold red]File System Error:[/bold red] {e}")
        sys.exit(EXIT_INVALID)
    except ConfigError as e:
        console.print(f"[bold red]Config Error:[/bold red] {e}")
        sys.exit(EXIT_INVALID)
    except ValidationError as e:
        console.print(f"[bold red]Validation Error:[/bold red] {e}")
        sys.exit(EXIT_INVALID)
    except GoalTensorError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(EXIT_INVALID)


def _load_raw(config: Path | None, overrides: dict[str, Any]) -> dict[str, str]:
    return merge_overrides(read_config_file(resolve_config_path(config)), overrides)


def _print_classic(report: ClassicReport) -> None:
    table = Table(title=f"{report.model.upper()} fit")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green", justify="right")
    table.add_row("dims", " x ".join(str(n) for n in report.dims))
    table.add_row("ranks", ", ".join(str(r) for r in report.ranks))
    table.add_row("compression ratio", f"{report.compression_ratio:.4g}")
    table.add_row("relative error", f"{report.relative_error:.6e}")
    if report.model == "cp":
        table.add_row("ALS iterations", str(report.iterations))
    console.print(table)
    if report.singular_gram:
        console.print("[yellow]CP-ALS used a ridge pseudo-inverse for a singular Gram matrix[/yellow]")


def _print_run(report: RunReport) -> None:
    table = Table(title=f"Goal-oriented {report.model.upper()} ({report.optimizer})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Initial", justify="right")
    table.add_column("Final", style="green", justify="right")
    table.add_row("f_go", f"{report.objective_initial:.6g}", f"{report.objective_final:.6g}")
    table.add_row(
        "rel. error (scaled)",
        f"{report.error_scaled_initial:.6e}",
        f"{report.error_scaled_final:.6e}",
    )
    table.add_row(
        "rel. error (unscaled)",
        f"{report.error_unscaled_initial:.6e}",
        f"{report.error_unscaled_final:.6e}",
    )
    for q in report.qois:
        table.add_row(
            f"QoI {q.name}", f"{q.relative_error_initial:.6e}", f"{q.relative_error_final:.6e}"
        )
        if q.display_error_initial is not None and q.display_error_final is not None:
            table.add_row(
                f"QoI sqrt({q.name})",
                f"{q.display_error_initial:.6e}",
                f"{q.display_error_final:.6e}",
            )
    console.print(table)
    console.print(
        f"[dim]compression ratio {report.compression_ratio:.4g}, lower bound "
        f"{report.lower_bound:.4g}, rejected steps {report.rejected_steps}[/dim]"
    )
    for name in report.dropped_qois:
        console.print(f"[yellow]QoI '{name}' was already preserved and left out of the objective[/yellow]")


@app.command()
def synth(
    config: Path | None = ConfigOption,
    out: Path = typer.Option(..., "--out", "-o", help="Tensor file to write"),
    seed: int | None = DataSeedOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Generate a synthetic low-rank + noise tensor from the synth.* keys."""
    _configure_logging(verbose, quiet)

    def action() -> None:
        raw = _load_raw(config, {"synth.seed": seed})
        spec = build_synth_spec(raw)
        if spec is None:
            raise ConfigError("synth.dims and synth.rank are required", "synth")
        X = synth_generate(spec)
        write_tensor(out, X)
        console.print(f"[bold green]✓ Tensor {X.dims} written to:[/bold green] {out}")

    _run_guarded(action)


def _classic(
    model: str,
    config: Path | None,
    overrides: dict[str, Any],
    verbose: bool,
    quiet: bool,
) -> None:
    _configure_logging(verbose, quiet)

    def action() -> None:
        cfg = build_run_config(_load_raw(config, overrides), model=model)
        report = GoalPipelineService().classic(cfg)
        _print_classic(report)
        if cfg.output_dir is not None:
            path = emit_classic_report(report, cfg.output_dir)
            console.print(f"[bold green]✓ Summary saved to:[/bold green] {path}")

    _run_guarded(action)


@app.command("cp-als")
def cp_als_command(
    config: Path | None = ConfigOption,
    rank: int | None = typer.Option(None, "--rank", "-r", help="CP rank"),
    seed: int | None = SeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Fit a CP model by alternating least squares."""
    _classic("cp", config, {"rank": rank, "seed": seed, "out": out}, verbose, quiet)


@app.command("sthosvd")
def sthosvd_command(
    config: Path | None = ConfigOption,
    tol: float | None = typer.Option(None, "--tol", help="Relative error tolerance in (0, 1)"),
    seed: int | None = DataSeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Fit a Tucker model by sequentially truncated HOSVD."""
    _classic("tucker", config, {"tol": tol, "synth.seed": seed, "out": out}, verbose, quiet)


def _goal(
    model: str,
    config: Path | None,
    overrides: dict[str, Any],
    verbose: bool,
    quiet: bool,
) -> None:
    _configure_logging(verbose, quiet)

    def action() -> None:
        cfg = build_run_config(_load_raw(config, overrides), model=model)
        console.print(f"\n[bold cyan]Running goal-oriented {model.upper()} decomposition...[/bold cyan]")
        report = GoalPipelineService().run(cfg)
        _print_run(report)
        if cfg.output_dir is not None:
            emit_report(report, cfg.output_dir)
            console.print(f"[bold green]✓ Report saved to:[/bold green] {cfg.output_dir}")

    _run_guarded(action)


@app.command("go-cp")
def go_cp(
    config: Path | None = ConfigOption,
    rank: int | None = typer.Option(None, "--rank", "-r", help="CP rank"),
    iters: int | None = typer.Option(None, "--iters", help="Optimizer iteration budget"),
    optimizer: str | None = typer.Option(None, "--optimizer", help="tr-newton or lbfgs"),
    seed: int | None = SeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Goal-oriented CP decomposition (CP-ALS initial guess)."""
    overrides = {"rank": rank, "iters": iters, "optimizer": optimizer, "seed": seed, "out": out}
    _goal("cp", config, overrides, verbose, quiet)


@app.command("go-tucker")
def go_tucker(
    config: Path | None = ConfigOption,
    tol: float | None = typer.Option(None, "--tol", help="ST-HOSVD tolerance in (0, 1)"),
    iters: int | None = typer.Option(None, "--iters", help="Optimizer iteration budget"),
    optimizer: str | None = typer.Option(None, "--optimizer", help="tr-newton or lbfgs"),
    seed: int | None = SeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Goal-oriented Tucker decomposition (ST-HOSVD initial guess)."""
    overrides = {"tol": tol, "iters": iters, "optimizer": optimizer, "seed": seed, "out": out}
    _goal("tucker", config, overrides, verbose, quiet)


def _print_sweep(report: SweepReport) -> None:
    setting = "rank" if report.model == "cp" else "tol"
    table = Table(title=f"{report.model.upper()} sweep ({report.optimizer})")
    table.add_column(setting, style="cyan", justify="right")
    table.add_column("ratio", justify="right")
    table.add_column("error classic", justify="right")
    table.add_column("error goal", style="green", justify="right")
    for name in report.qoi_names:
        table.add_column(f"{name} classic", justify="right")
        table.add_column(f"{name} goal", style="green", justify="right")
    for p in report.points:
        pairs = zip(p.qoi_classic, p.qoi_goal, strict=True)
        qoi_cells = [f"{e:.3e}" for pair in pairs for e in pair]
        table.add_row(
            f"{p.setting:g}",
            f"{p.compression_ratio:.4g}",
            f"{p.classic_error:.4e}",
            f"{p.goal_error:.4e}",
            *qoi_cells,
        )
    console.print(table)


@app.command()
def sweep(
    config: Path | None = ConfigOption,
    model: str = typer.Option(
        "cp", "--model", "-m", help="cp (sweeps ranks) or tucker (sweeps tolerances)"
    ),
    values: str | None = typer.Option(
        None, "--values", help="Comma-separated ranks or tolerances (sweep.ranks / sweep.tols)"
    ),
    iters: int | None = typer.Option(None, "--iters", help="Optimizer iteration budget per point"),
    optimizer: str | None = typer.Option(None, "--optimizer", help="tr-newton or lbfgs"),
    seed: int | None = SeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Classic vs goal-oriented error across ranks (CP) or tolerances (Tucker)."""
    _configure_logging(verbose, quiet)

    def action() -> None:
        if model not in ("cp", "tucker"):
            raise ConfigError(f"expected 'cp' or 'tucker', got {model!r}", "model")
        key = "sweep.ranks" if model == "cp" else "sweep.tols"
        overrides = {key: values, "iters": iters, "optimizer": optimizer, "seed": seed, "out": out}
        raw = _load_raw(config, overrides)
        settings = build_sweep_settings(raw, model)
        # la configurazione base vuole solo una dimensione valida, ogni punto la sostituisce
        raw.pop("tucker.ranks", None)
        raw.setdefault("rank" if model == "cp" else "tol", f"{settings[0]:g}")
        cfg = build_run_config(raw, model=model)
        console.print(f"\n[bold cyan]Sweeping {len(settings)} {model.upper()} fits...[/bold cyan]")
        report = GoalPipelineService().sweep(cfg, settings)
        _print_sweep(report)
        if cfg.output_dir is not None:
            path = emit_sweep(report, cfg.output_dir)
            console.print(f"[bold green]✓ Sweep saved to:[/bold green] {path}")

    _run_guarded(action)


@app.command("qoi-eval")
def qoi_eval(
    config: Path | None = ConfigOption,
    seed: int | None = DataSeedOption,
    out: Path | None = OutOption,
    verbose: bool = VerboseOption,
    quiet: bool = QuietOption,
) -> None:
    """Evaluate the configured QoIs on the data."""
    _configure_logging(verbose, quiet)

    def action() -> None:
        raw = _load_raw(config, {"synth.seed": seed, "out": out})
        service = GoalPipelineService()
        input_path = Path(raw["input"]) if "input" in raw else None
        X = service.load_data(input_path, build_synth_spec(raw))
        mesh = Path(raw["mesh"]) if "mesh" in raw else None
        run_cfg = {k: raw[k] for k in ("variable_mode", "mu0") if k in raw}
        try:
            variable_mode = int(run_cfg.get("variable_mode", "0"))
            mu0 = float(run_cfg.get("mu0", "1"))
        except ValueError as e:
            raise ConfigError(str(e), "variable_mode/mu0") from e
        values = service.evaluate_qois(X, build_qoi_specs(raw), variable_mode, mesh, mu0)

        table = Table(title="Quantities of interest")
        table.add_column("QoI", style="cyan")
        table.add_column("t", justify="right")
        table.add_column("value", style="green", justify="right")
        for q in values:
            for t, v in zip(q.times, q.values, strict=True):
                table.add_row(q.name, str(t), f"{v:.10g}")
        console.print(table)
        if "out" in raw:
            path = emit_qoi_values(values, Path(raw["out"]))
            console.print(f"[bold green]✓ QoI values saved to:[/bold green] {path}")

    _run_guarded(action)


if __name__ == "__main__":
    app()
