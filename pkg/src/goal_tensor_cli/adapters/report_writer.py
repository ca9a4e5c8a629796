"""Report files of a goal-oriented run.

Dewey: Conseguenze pratiche - stessi semi, stessi file byte per byte.

- ``summary.json``: scalari del report, chiavi ordinate, nessun tempo di esecuzione.
- ``qoi_trajectories.csv``: time, qoi_name, data, initial_model, final_model.
- ``trace.csv``: punto iniziale e iterazioni accettate dell'ottimizzatore.
- ``sweep.csv``: una riga per rango o tolleranza, errori tradizionali e goal-oriented.

I float nei CSV hanno 17 cifre significative e punto decimale.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any

from goal_tensor_cli.core.errors import FileSystemError
from goal_tensor_cli.core.models import ClassicReport, QoIValues, RunReport, SweepReport

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
TRAJECTORY_FILE = "qoi_trajectories.csv"
TRACE_FILE = "trace.csv"
QOI_VALUES_FILE = "qoi_values.csv"
SWEEP_FILE = "sweep.csv"

SWEEP_COLUMNS = (
    "model",
    "setting",
    "ranks",
    "compression_ratio",
    "classic_error",
    "goal_error",
)

TRACE_COLUMNS = (
    "iteration",
    "objective",
    "gradient_norm",
    "step_norm",
    "inner_iterations",
    "radius",
    "frobenius_term",
    "qoi_terms",
    "note",
)


def fmt(value: float | None) -> str:
    """Float con 17 cifre significative; stringa vuota per valori assenti."""
    return "" if value is None else format(float(value), ".17g")


def _prepare_dir(directory: Path) -> Path:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FileSystemError(f"Cannot create output directory {directory}: {e}") from e
    if not directory.is_dir():
        raise FileSystemError(f"Output path exists but is not a directory: {directory}")
    return directory


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise FileSystemError(f"Error writing {path}: {e}") from e


def _write_csv(path: Path, header: tuple[str, ...], rows: list[list[str]]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise FileSystemError(f"Error writing {path}: {e}") from e


def emit_report(report: RunReport, directory: str | Path) -> list[Path]:
    """Scrive summary.json, qoi_trajectories.csv e trace.csv.

    Returns:
        Percorsi scritti.

    Raises:
        FileSystemError: Directory non creabile o file non scrivibile.
    """
    out = _prepare_dir(Path(directory))

    summary = out / SUMMARY_FILE
    _write_json(summary, report.summary())

    trajectories = out / TRAJECTORY_FILE
    rows = [
        [str(t), q.name, fmt(data), fmt(initial), fmt(final)]
        for q in report.qois
        for t, data, initial, final in zip(
            q.times, q.data, q.initial_model, q.final_model, strict=True
        )
    ]
    _write_csv(trajectories, ("time", "qoi_name", "data", "initial_model", "final_model"), rows)

    trace = out / TRACE_FILE
    trace_rows = [
        [
            str(r.iteration),
            fmt(r.objective),
            fmt(r.gradient_norm),
            fmt(r.step_norm),
            str(r.inner_iterations),
            fmt(r.radius),
            fmt(r.frobenius_term),
            ";".join(fmt(v) for v in r.qoi_terms),
            r.note,
        ]
        for r in report.trace
        if r.accepted
    ]
    _write_csv(trace, TRACE_COLUMNS, trace_rows)

    logger.info(f"Report written to {out}")
    return [summary, trajectories, trace]


def emit_classic_report(report: ClassicReport, directory: str | Path) -> Path:
    """Scrive summary.json di un fit tradizionale."""
    out = _prepare_dir(Path(directory))
    path = out / SUMMARY_FILE
    _write_json(path, report.summary())
    logger.info(f"Classic fit summary written to {path}")
    return path


def emit_qoi_values(values: list[QoIValues], directory: str | Path) -> Path:
    """Scrive qoi_values.csv (time, qoi_name, value)."""
    out = _prepare_dir(Path(directory))
    path = out / QOI_VALUES_FILE
    rows = [[str(t), q.name, fmt(v)] for q in values for t, v in zip(q.times, q.values, strict=True)]
    _write_csv(path, ("time", "qoi_name", "value"), rows)
    return path


def emit_sweep(report: SweepReport, directory: str | Path) -> Path:
    """Scrive sweep.csv; dopo le colonne fisse, <qoi>_classic e <qoi>_goal per ogni QoI.

    Raises:
        FileSystemError: Directory non creabile o file non scrivibile.
    """
    out = _prepare_dir(Path(directory))
    path = out / SWEEP_FILE
    header = SWEEP_COLUMNS + tuple(
        f"{name}_{kind}" for name in report.qoi_names for kind in ("classic", "goal")
    )
    rows: list[list[str]] = []
    for p in report.points:
        row = [
            report.model,
            fmt(p.setting),
            ";".join(str(r) for r in p.ranks),
            fmt(p.compression_ratio),
            fmt(p.classic_error),
            fmt(p.goal_error),
        ]
        for classic, goal in zip(p.qoi_classic, p.qoi_goal, strict=True):
            row += [fmt(classic), fmt(goal)]
        rows.append(row)
    _write_csv(path, header, rows)
    logger.info(f"Sweep of {len(rows)} points written to {path}")
    return path
