"""Tests for the report files."""

import csv
import json

import pytest

from goal_tensor_cli.adapters.report_writer import (
    QOI_VALUES_FILE,
    SUMMARY_FILE,
    SWEEP_FILE,
    TRACE_COLUMNS,
    emit_classic_report,
    emit_qoi_values,
    emit_report,
    emit_sweep,
    fmt,
)
from goal_tensor_cli.core.errors import FileSystemError
from goal_tensor_cli.core.models import (
    ClassicReport,
    QoIReport,
    QoIValues,
    RunReport,
    SweepPoint,
    SweepReport,
    TraceRecord,
)


@pytest.fixture
def run_report():
    """A two-iteration report with one rejected step."""
    trace = (
        TraceRecord(0, 1.0, 0.5, radius=1.0, frobenius_term=0.5, qoi_terms=(0.25, 0.25)),
        TraceRecord(1, 0.8, 0.3, step_norm=0.2, inner_iterations=3, accepted=False, radius=0.25),
        TraceRecord(
            2,
            0.6,
            0.1,
            step_norm=0.1,
            inner_iterations=2,
            radius=0.25,
            frobenius_term=0.4,
            qoi_terms=(0.1, 0.1),
            note="boundary",
        ),
    )
    qoi = QoIReport(
        name="mass",
        display="identity",
        times=(0, 1),
        data=(1.0, 2.0),
        initial_model=(1.1, 2.1),
        final_model=(1.0, 2.0),
        relative_error_initial=0.06,
        relative_error_final=0.0,
    )
    return RunReport(
        model="cp",
        optimizer="tr-newton",
        ranks=(2,),
        dims=(3, 4, 2),
        compression_ratio=2.0,
        error_scaled_initial=0.1,
        error_scaled_final=0.11,
        error_unscaled_initial=0.05,
        error_unscaled_final=0.051,
        objective_initial=1.0,
        objective_final=0.6,
        lower_bound=1.0 / 3.0,
        weights=(1.0, 2.0, 3.0),
        dropped_qois=(),
        qois=(qoi,),
        trace=trace,
        rejected_steps=1,
    )


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_fmt():
    """Test 17 significant digits and the empty marker."""
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(2) == "2"
    assert fmt(None) == ""
    assert float(fmt(1.0 / 3.0)) == 1.0 / 3.0


def test_emit_report_writes_three_files(tmp_path, run_report):
    """Test the file set and the nested output directory."""
    paths = emit_report(run_report, tmp_path / "out" / "run")

    assert [p.name for p in paths] == ["summary.json", "qoi_trajectories.csv", "trace.csv"]
    assert all(p.is_file() for p in paths)


def test_summary_contents(tmp_path, run_report):
    """Test the summary scalars, including step counts."""
    summary_path, _, _ = emit_report(run_report, tmp_path)

    summary = json.loads(summary_path.read_text(encoding="utf-8"))

    assert summary["objective"] == {"initial": 1.0, "final": 0.6, "lower_bound": 1.0 / 3.0}
    assert summary["iterations"] == 2
    assert summary["accepted_steps"] == 1
    assert summary["rejected_steps"] == 1
    assert summary["qois"][0]["name"] == "mass"
    assert "time" not in json.dumps(summary)


def test_trace_keeps_accepted_records(tmp_path, run_report):
    """Test that trace.csv holds the start point and accepted iterations only."""
    _, _, trace_path = emit_report(run_report, tmp_path)

    rows = read_rows(trace_path)

    assert tuple(rows[0]) == TRACE_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0", "2"]
    assert rows[1][7] == "0.25;0.25"
    assert rows[2][-1] == "boundary"


def test_trajectories(tmp_path, run_report):
    """Test one row per QoI and time."""
    _, trajectories, _ = emit_report(run_report, tmp_path)

    rows = read_rows(trajectories)

    assert rows[0] == ["time", "qoi_name", "data", "initial_model", "final_model"]
    assert rows[1] == ["0", "mass", "1", "1.1000000000000001", "1"]
    assert len(rows) == 3


def test_output_path_is_a_file(tmp_path, run_report):
    """Test that a file in place of the directory raises FileSystemError."""
    blocker = tmp_path / "taken"
    blocker.write_text("x", encoding="utf-8")

    with pytest.raises(FileSystemError):
        emit_report(run_report, blocker)


def test_emit_classic_report(tmp_path):
    """Test the classic summary file."""
    report = ClassicReport(
        model="tucker", dims=(4, 4), ranks=(2, 1), compression_ratio=16 / 14, relative_error=0.2
    )

    path = emit_classic_report(report, tmp_path)

    assert path.name == SUMMARY_FILE
    assert json.loads(path.read_text(encoding="utf-8"))["ranks"] == [2, 1]


def test_emit_qoi_values(tmp_path):
    """Test the qoi_values.csv layout."""
    values = [QoIValues(name="mass", times=(3, 4), values=(0.5, 1.5))]

    path = emit_qoi_values(values, tmp_path)

    assert path.name == QOI_VALUES_FILE
    assert read_rows(path) == [
        ["time", "qoi_name", "value"],
        ["3", "mass", "0.5"],
        ["4", "mass", "1.5"],
    ]


def test_emit_sweep(tmp_path):
    """Test one row per setting with classic and goal errors for each QoI."""
    points = (
        SweepPoint(2.0, (2,), 10.0, 0.3, 0.31, (0.2, 0.1), (0.01, 0.02)),
        SweepPoint(4.0, (4,), 5.0, 0.1, 0.12, (0.05, 0.04), (0.001, 0.002)),
    )
    report = SweepReport(model="cp", optimizer="lbfgs", qoi_names=("mass", "energy"), points=points)

    path = emit_sweep(report, tmp_path / "sweep")

    assert path.name == SWEEP_FILE
    rows = read_rows(path)
    assert rows[0] == [
        "model",
        "setting",
        "ranks",
        "compression_ratio",
        "classic_error",
        "goal_error",
        "mass_classic",
        "mass_goal",
        "energy_classic",
        "energy_goal",
    ]
    assert rows[1][:6] == ["cp", "2", "2", "10", "0.29999999999999999", "0.31"]
    assert rows[1][6:] == ["0.20000000000000001", "0.01", "0.10000000000000001", "0.02"]
    assert rows[2][:3] == ["cp", "4", "4"]
    assert len(rows) == 3


def test_sweep_report_checks_qoi_count():
    """Test that every point carries one error pair per QoI."""
    point = SweepPoint(0.1, (2, 2), 3.0, 0.1, 0.1, (0.5,), (0.4,))

    with pytest.raises(ValueError):
        SweepReport(model="tucker", optimizer="tr-newton", qoi_names=("a", "b"), points=(point,))
