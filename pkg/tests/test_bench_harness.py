"""Benchmark harness and CLI, exercised end to end at desk scale."""

import csv
import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from parsdc.bench.cli import main
from parsdc.bench.config import load_config
from parsdc.bench.harness import (
    perf_model_report,
    run_single,
    speedup_report,
    strong_scaling,
    work_precision,
)
from parsdc.bench.metrics import observed_order
from parsdc.problems import JetConfig, PlanarShallowWater, jet_initial_condition, read_snapshot


def write_config(tmp_path, text, name="config.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


DAHLQUIST_RUN = """
[problem]
kind = "dahlquist"
lambda_impl = -1.0
lambda_expl = 0.2
width = 4

[stepper]
scheme = "dsdc"
n_nodes = 4
n_sweeps = 4
dt = 0.1

[run]
t_end = 1.0
checkpoint_interval = 5
core_budget = 8
"""

SWE_BALANCED = """
[problem]
kind = "planar-swe"
n_grid = 64
domain_length = 4.0e6
mean_geopotential = 1.0e5
coriolis = 1.0e-4

[problem.jet]
perturbation_amplitude = 0.0

[stepper]
scheme = "dsdc"
dt = 30.0

[run]
t_end = 300.0
core_budget = 8
"""


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


# -- run ----------------------------------------------------------------------


def test_run_single_dahlquist_smoke(tmp_path):
    config = load_config(write_config(tmp_path, DAHLQUIST_RUN))
    report = run_single(config, str(tmp_path / "out"))
    assert report["scheme"] == "dsdc"
    assert report["n_steps"] == 10
    assert np.isfinite(report["final"]["state_norm"])
    assert report["counters"]["n_solve"] == 10 * (3 * 4 + 1)
    assert report["checkpoint_times"] == pytest.approx([0.0, 0.5, 1.0])
    on_disk = json.loads((tmp_path / "out" / "run_report.json").read_text())
    assert on_disk["counters"] == report["counters"]
    assert on_disk["environment"]["physical_cores"] is not None


def test_run_single_balanced_jet_stays_steady(tmp_path):
    config = load_config(write_config(tmp_path, SWE_BALANCED))
    run_single(config, str(tmp_path / "out"))
    meta, final = read_snapshot(str(tmp_path / "out" / "final_state.snap"))
    assert meta["n_grid"] == 64
    assert meta["time"] == 300.0
    problem = PlanarShallowWater(
        n_grid=64, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    initial = jet_initial_condition(problem, JetConfig(perturbation_amplitude=0.0))
    drift = np.linalg.norm(problem.error_field(final) - problem.error_field(initial))
    assert drift <= 1e-6 * np.linalg.norm(problem.error_field(initial))


def test_run_single_thread_counts_agree_bitwise(tmp_path):
    finals = []
    for threads in (1, 4):
        config = load_config(
            write_config(tmp_path, SWE_BALANCED), overrides={"time_threads": threads}
        )
        out = tmp_path / f"out-{threads}"
        run_single(config, str(out))
        finals.append(read_snapshot(str(out / "final_state.snap"))[1])
    np.testing.assert_array_equal(finals[0], finals[1])


def test_run_divergence_propagates_with_step_index(tmp_path):
    text = DAHLQUIST_RUN.replace("lambda_expl = 0.2", "lambda_expl = 40.0").replace(
        "dt = 0.1", "dt = 10.0"
    ).replace("t_end = 1.0", "t_end = 500.0")
    config = load_config(write_config(tmp_path, text))
    from parsdc.errors import DivergenceError

    with pytest.raises(DivergenceError) as info:
        run_single(config, str(tmp_path / "out"))
    assert info.value.step_index >= 1


# -- work precision --------------------------------------------------------------


def test_work_precision_slopes_and_ordering(tmp_path):
    text = """
    [problem]
    kind = "dahlquist"
    lambda_impl = -1.0
    lambda_expl = 0.2

    [stepper]
    scheme = "dsdc"
    n_nodes = 4
    n_sweeps = 4
    dt_list = [0.125, 0.0625, 0.03125, 0.015625]

    [run]
    t_end = 1.0

    # a fourth-order reference keeps its own error far below the finest
    # candidate point, so the measured slopes stay clean
    [reference]
    scheme = "dsdc"
    dt = 0.001953125

    [workprecision]
    schemes = ["dsdc", "imex-o2"]
    """
    config = load_config(write_config(tmp_path, text))
    points = work_precision(config, str(tmp_path / "out"))
    assert [p["scheme"] for p in points] == ["dsdc"] * 4 + ["imex-o2"] * 4
    assert [p["dt"] for p in points[:4]] == [0.125, 0.0625, 0.03125, 0.015625]
    assert all(p["status"] == "ok" for p in points)
    dsdc = [p for p in points if p["scheme"] == "dsdc"]
    imex = [p for p in points if p["scheme"] == "imex-o2"]
    slope_dsdc = observed_order([p["dt"] for p in dsdc], [p["error"] for p in dsdc])
    slope_imex = observed_order([p["dt"] for p in imex], [p["error"] for p in imex])
    assert slope_dsdc >= 3.5
    assert 1.7 <= slope_imex <= 2.3
    rows = read_rows(str(tmp_path / "out" / "work_precision.csv"))
    assert [row["scheme"] for row in rows] == [p["scheme"] for p in points]
    assert float(rows[0]["error"]) == pytest.approx(points[0]["error"])


def test_work_precision_flags_divergence_without_aborting(tmp_path):
    # dt = 1 puts the explicit eigenvalue far outside the stability region
    # (growth factor 5 per step, overflow after ~450 steps); dt = 0.25 is
    # stable, and the explicit reference dt keeps the sweep fast
    text = """
    [problem]
    kind = "dahlquist"
    lambda_impl = 0.0
    lambda_expl = -4.0

    [stepper]
    scheme = "imex-o2"
    dt_list = [1.0, 0.25]

    [run]
    t_end = 448.0

    [reference]
    dt = 0.03125
    """
    config = load_config(write_config(tmp_path, text))
    points = work_precision(config, str(tmp_path / "out"))
    by_dt = {p["dt"]: p for p in points}
    assert by_dt[1.0]["status"] == "diverged"
    assert np.isnan(by_dt[1.0]["error"])
    assert by_dt[0.25]["status"] == "ok"
    assert np.isfinite(by_dt[0.25]["error"])


# -- scaling ----------------------------------------------------------------------


def test_strong_scaling_table(tmp_path):
    text = DAHLQUIST_RUN + textwrap.dedent(
        """
        [scaling]
        splits = [[1, 2], [1, 16], [64, 64]]
        """
    )
    config = load_config(write_config(tmp_path, text))
    rows = strong_scaling(config, str(tmp_path / "out"))
    assert (rows[0]["space_threads"], rows[0]["time_threads"]) == (1, 1)  # baseline enforced
    ok = {(r["space_threads"], r["time_threads"]): r for r in rows}
    assert ok[(1, 2)]["status"] == "ok"
    assert ok[(1, 2)]["wall_s"] > 0.0
    n_dof = 4
    assert ok[(1, 1)]["time_per_dof_s"] == pytest.approx(ok[(1, 1)]["wall_s"] / (10 * n_dof))
    # 16 time threads exceed the 4 collocation nodes: skipped, not fatal
    assert ok[(1, 16)]["status"].startswith("skipped")
    # 4096 threads exceed the core budget
    assert ok[(64, 64)]["status"].startswith("skipped")
    on_disk = read_rows(str(tmp_path / "out" / "strong_scaling.csv"))
    assert len(on_disk) == 4
    assert on_disk[0]["status"] == "ok"


# -- speedup ----------------------------------------------------------------------


def test_speedup_report_base_and_flags(tmp_path):
    text = """
    [problem]
    kind = "dahlquist"
    lambda_impl = -1.0
    lambda_expl = 0.2

    [stepper]
    scheme = "dsdc"
    n_nodes = 4
    n_sweeps = 4
    dt = 0.1

    [run]
    t_end = 1.0
    reps = 2
    core_budget = 8

    [[speedup.candidate]]
    scheme = "imex-o2"
    dt = 0.1

    [[speedup.candidate]]
    scheme = "imex-o2"
    dt = 0.5
    """
    config = load_config(write_config(tmp_path, text))
    report = speedup_report(config, str(tmp_path / "out"))
    runs = report["runs"]
    assert runs[0]["scheme"] == "dsdc"
    assert runs[0]["speedup"] == 1.0
    assert runs[0]["comparable"] is True
    # second-order scheme at the same dt is far less accurate than dsdc
    assert runs[1]["error"] > 2.0 * runs[0]["error"]
    assert runs[1]["comparable"] is False
    assert (tmp_path / "out" / "speedup.json").exists()
    rows = read_rows(str(tmp_path / "out" / "speedup.csv"))
    assert [row["scheme"] for row in rows] == ["dsdc", "imex-o2", "imex-o2"]


# -- perf model --------------------------------------------------------------------


def test_perf_model_report_on_shallow_water(tmp_path):
    text = """
    [problem]
    kind = "planar-swe"
    n_grid = 48

    [stepper]
    scheme = "dsdc"
    n_nodes = 4
    n_sweeps = 4
    dt = 30.0

    [run]
    t_end = 600.0
    """
    config = load_config(write_config(tmp_path, text))
    report = perf_model_report(config, str(tmp_path / "out"))
    assert report["M"] == 4 and report["K"] == 4
    assert report["c_E"] > 0.0 and report["c_S"] > 0.0
    assert report["C_seq"] > report["C_par"]
    assert report["S_theory"] == 3.25
    assert report["S_measured"] is None
    on_disk = json.loads((tmp_path / "out" / "perf_model.json").read_text())
    assert on_disk["M"] == 4


def test_perf_model_requires_dsdc(tmp_path):
    text = DAHLQUIST_RUN.replace('scheme = "dsdc"', 'scheme = "imex-o2"')
    config = load_config(write_config(tmp_path, text))
    from parsdc.errors import ConfigError

    with pytest.raises(ConfigError, match="dsdc"):
        perf_model_report(config, str(tmp_path / "out"))


# -- CLI ----------------------------------------------------------------------------


def test_cli_run_exit_codes(tmp_path):
    path = write_config(tmp_path, DAHLQUIST_RUN)
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "run_report.json").exists()


def test_cli_config_error_exit_code(tmp_path):
    bad = write_config(tmp_path, DAHLQUIST_RUN.replace("dt = 0.1", "dt = 0.3"), name="bad.toml")
    assert main(["run", "--config", bad, "--out", str(tmp_path / "out")]) == 2
    missing = str(tmp_path / "nope.toml")
    assert main(["run", "--config", missing, "--out", str(tmp_path / "out")]) == 2


def test_cli_divergence_exit_code(tmp_path):
    text = DAHLQUIST_RUN.replace("lambda_expl = 0.2", "lambda_expl = 40.0").replace(
        "dt = 0.1", "dt = 10.0"
    ).replace("t_end = 1.0", "t_end = 500.0")
    path = write_config(tmp_path, text)
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 3


def test_cli_override_flags_reach_the_run(tmp_path):
    path = write_config(tmp_path, SWE_BALANCED)
    out = tmp_path / "out"
    assert (
        main(
            [
                "run",
                "--config",
                path,
                "--out",
                str(out),
                "--time-threads",
                "2",
                "--metric",
                "abs",
            ]
        )
        == 0
    )
    report = json.loads((out / "run_report.json").read_text())
    assert report["time_threads"] == 2


def test_cli_module_entry_point(tmp_path):
    path = write_config(tmp_path, DAHLQUIST_RUN)
    result = subprocess.run(
        [sys.executable, "-m", "parsdc.bench.cli", "run", "--config", path, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert "complete" in result.stderr
