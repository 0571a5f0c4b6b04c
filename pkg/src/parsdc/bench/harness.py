"""Benchmark orchestration: single runs, sweeps, scaling and speedup tables.

Every experiment drives the integrator through :func:`parsdc.integrate`;
there are no benchmark-only stepping paths.  Outputs are JSON reports and
CSV tables with fixed headers (documented per function), deterministic for
a given config and thread counts apart from wall-time fields.
"""

import csv
import json
import os
import platform
import time

import numpy as np
import psutil
import scipy

import parsdc
from ..collocation import CollocationTable
from ..core import evaluation_counters, state_norm
from ..errors import ConfigError, DivergenceError
from ..integrators import (
    Ab2SiStepper,
    DiagonalSdcStepper,
    ImexO2Stepper,
    SdcConfig,
    SerialSdcStepper,
    SweepMode,
    integrate,
)
from ..perfmodel import fit_costs, perf_report
from ..problems import (
    DahlquistProblem,
    JetConfig,
    PlanarShallowWater,
    jet_initial_condition,
    write_snapshot,
)
from .metrics import error_linf_l2

__all__ = [
    "build_initial_state",
    "build_problem",
    "build_stepper",
    "environment_info",
    "perf_model_report",
    "run_single",
    "speedup_report",
    "strong_scaling",
    "work_precision",
]


def build_problem(config, space_threads=None):
    if config.problem_kind == "dahlquist":
        return DahlquistProblem(**config.problem_params)
    space = config.space_threads if space_threads is None else space_threads
    return PlanarShallowWater(**config.problem_params, space_threads=space)


def build_initial_state(config, problem):
    if config.problem_kind == "dahlquist":
        return problem.initial_state()
    return jet_initial_condition(problem, JetConfig(**config.jet_params))


def build_stepper(config, scheme=None, time_threads=None, n_sweeps=None):
    """Stepper instance for a scheme name; SDC parameters come from the config."""
    scheme = config.scheme if scheme is None else scheme
    if scheme == "imex-o2":
        return ImexO2Stepper()
    if scheme == "ab2-si":
        return Ab2SiStepper()
    table = CollocationTable.radau_right(config.n_nodes)
    n_sweeps = config.n_sweeps if n_sweeps is None else n_sweeps
    if scheme == "sdc-serial":
        return SerialSdcStepper(SdcConfig(table=table, n_sweeps=n_sweeps, mode=SweepMode.SERIAL))
    threads = config.time_threads if time_threads is None else time_threads
    mode = SweepMode.DIAGONAL_PARALLEL if threads > 1 else SweepMode.DIAGONAL_SEQUENTIAL
    return DiagonalSdcStepper(
        SdcConfig(
            table=table,
            n_sweeps=n_sweeps,
            preconditioner=config.preconditioner,
            mode=mode,
            time_threads=threads,
        )
    )


def _close_stepper(stepper):
    cfg = getattr(stepper, "cfg", None)
    if cfg is not None:
        cfg.close()


def environment_info():
    """Host facts recorded into every report."""
    thread_env = {
        key: os.environ[key]
        for key in ("OMP_NUM_THREADS", "OMP_PLACES", "OMP_PROC_BIND", "MKL_NUM_THREADS")
        if key in os.environ
    }
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "package": parsdc.__version__,
        "physical_cores": psutil.cpu_count(logical=False),
        "logical_cores": psutil.cpu_count(logical=True),
        "thread_env": thread_env,
    }


def _timed_integrate(problem, state, dt, n_steps, stepper, checkpoint_interval=None):
    t_start = time.perf_counter()
    trajectory = integrate(
        problem, state, dt, n_steps, stepper, checkpoint_interval=checkpoint_interval
    )
    return trajectory, time.perf_counter() - t_start


def run_single(config, out_dir):
    """Run the configured integration once; returns the JSON-ready report.

    Writes ``run_report.json`` and, for the shallow-water problem, the final
    state as ``final_state.snap`` in the problems module's binary format.
    Divergence propagates as :class:`DivergenceError`.
    """
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(config)
    state = build_initial_state(config, problem)
    stepper = build_stepper(config)
    n_steps = config.n_steps()
    interval = config.checkpoint_interval or None
    try:
        trajectory, wall_s = _timed_integrate(
            problem, state, config.dt, n_steps, stepper, checkpoint_interval=interval
        )
    finally:
        _close_stepper(stepper)
    n_f_expl, n_f_impl, n_solve = evaluation_counters(problem)
    step_walls = [report.wall_s for report in trajectory.reports]
    final = trajectory.states[-1]
    final_facts = {"state_norm": state_norm(final)}
    if config.problem_kind == "planar-swe":
        final_facts["total_energy"] = problem.total_energy(final)
        final_facts["mean_geopotential_anomaly"] = problem.mean_geopotential_anomaly(final)
        final_facts["vorticity_norm"] = float(np.linalg.norm(problem.error_field(final)))
        write_snapshot(os.path.join(out_dir, "final_state.snap"), problem, final, config.t_end)
    report = {
        "title": config.title,
        "problem": config.problem_kind,
        "scheme": trajectory.scheme,
        "dt": config.dt,
        "n_steps": n_steps,
        "t_end": config.t_end,
        "space_threads": config.space_threads,
        "time_threads": config.time_threads,
        "wall_s": wall_s,
        "step_wall_s": {
            "min": min(step_walls),
            "median": float(np.median(step_walls)),
            "max": max(step_walls),
        },
        "counters": {"n_f_expl": n_f_expl, "n_f_impl": n_f_impl, "n_solve": n_solve},
        "checkpoint_times": trajectory.times,
        "final": final_facts,
        "environment": environment_info(),
    }
    with open(os.path.join(out_dir, "run_report.json"), "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
    return report


def _reference_dt(config):
    finest = min(config.dt_list)
    if config.reference_dt is not None:
        if config.reference_dt > finest / 8.0:
            raise ConfigError(
                f"reference dt {config.reference_dt} coarser than one eighth of the finest "
                f"candidate dt {finest}"
            )
        return config.reference_dt
    return finest / 64.0


def _common_checkpoint_intervals(config, dts, reference_dt):
    """Checkpoint intervals aligning all runs on multiples of the coarsest dt.

    Returns ``(intervals, reference_interval)``; falls back to endpoint-only
    comparison (all ``None``) when some step size does not divide the
    coarsest one, so checkpoint times always match exactly.
    """
    coarsest = max(dts)
    intervals = []
    for dt in dts:
        ratio = coarsest / dt
        if abs(ratio - round(ratio)) > 1e-9:
            return [None] * len(dts), None
        intervals.append(int(round(ratio)))
    ratio = coarsest / reference_dt
    if abs(ratio - round(ratio)) > 1e-9:
        return [None] * len(dts), None
    return intervals, int(round(ratio))


def _reference_trajectory(config, reference_dt, reference_interval):
    problem = build_problem(config)
    state = build_initial_state(config, problem)
    stepper = build_stepper(config, scheme=config.reference_scheme, time_threads=1)
    try:
        trajectory, _ = _timed_integrate(
            problem,
            state,
            reference_dt,
            config.n_steps(reference_dt),
            stepper,
            checkpoint_interval=reference_interval,
        )
    finally:
        _close_stepper(stepper)
    return trajectory


def work_precision(config, out_dir):
    """Error against wall time per (scheme, dt); returns the point list.

    Writes ``work_precision.csv`` with header
    ``scheme,dt,wall_s,error,status``; rows are ordered by scheme (config
    order) and descending dt.  Diverged runs are flagged in ``status``
    instead of aborting the sweep.  Errors are measured against a common
    reference trajectory at checkpoints aligned on the coarsest step size
    (endpoints only when the step sizes do not nest).
    """
    os.makedirs(out_dir, exist_ok=True)
    dts = sorted(config.dt_list, reverse=True)
    reference_dt = _reference_dt(config)
    intervals, reference_interval = _common_checkpoint_intervals(config, dts, reference_dt)
    reference = _reference_trajectory(config, reference_dt, reference_interval)
    points = []
    for scheme in config.wp_schemes:
        for dt, interval in zip(dts, intervals):
            problem = build_problem(config)
            state = build_initial_state(config, problem)
            stepper = build_stepper(config, scheme=scheme)
            try:
                trajectory, wall_s = _timed_integrate(
                    problem, state, dt, config.n_steps(dt), stepper, checkpoint_interval=interval
                )
                error = error_linf_l2(
                    trajectory, reference, problem, relative=config.metric == "rel"
                )
                status = "ok"
            except DivergenceError:
                error = float("nan")
                wall_s = float("nan")
                status = "diverged"
            finally:
                _close_stepper(stepper)
            points.append(
                {"scheme": scheme, "dt": dt, "wall_s": wall_s, "error": error, "status": status}
            )
    with open(os.path.join(out_dir, "work_precision.csv"), "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["scheme", "dt", "wall_s", "error", "status"])
        writer.writeheader()
        writer.writerows(points)
    return points


def strong_scaling(config, out_dir):
    """Wall time and time-per-DoF across (space_threads, time_threads) splits.

    Writes ``strong_scaling.csv`` with header
    ``space_threads,time_threads,total_threads,wall_s,time_per_dof_s,status``.
    The (1, 1) baseline row is always present; wall times take the minimum
    over ``config.reps`` repetitions; splits exceeding the core budget or
    rejected by the stepper are recorded as skipped, not dropped.
    """
    os.makedirs(out_dir, exist_ok=True)
    splits = list(config.scaling_splits)
    if (1, 1) not in splits:
        splits.insert(0, (1, 1))
    n_steps = config.n_steps()
    rows = []
    for space, timepar in splits:
        row = {
            "space_threads": space,
            "time_threads": timepar,
            "total_threads": space * timepar,
            "wall_s": float("nan"),
            "time_per_dof_s": float("nan"),
            "status": "ok",
        }
        if not config.thread_budget_check(space, timepar):
            row["status"] = "skipped: exceeds core budget"
            rows.append(row)
            continue
        walls = []
        try:
            for _ in range(config.reps):
                problem = build_problem(config, space_threads=space)
                state = build_initial_state(config, problem)
                stepper = build_stepper(config, time_threads=timepar)
                try:
                    _, wall_s = _timed_integrate(problem, state, config.dt, n_steps, stepper)
                finally:
                    _close_stepper(stepper)
                walls.append(wall_s)
        except (ConfigError, DivergenceError, ValueError) as exc:
            row["status"] = f"skipped: {exc}"
            rows.append(row)
            continue
        row["wall_s"] = min(walls)
        row["time_per_dof_s"] = min(walls) / (n_steps * problem.n_dof)
        rows.append(row)
    with open(os.path.join(out_dir, "strong_scaling.csv"), "w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=[
                "space_threads",
                "time_threads",
                "total_threads",
                "wall_s",
                "time_per_dof_s",
                "status",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)
    return rows


def speedup_report(config, out_dir):
    """Base-over-candidate wall-time ratios at comparable accuracy.

    The base run uses the config's ``[stepper]`` settings; candidates come
    from ``[[speedup.candidate]]``.  Every run is measured against the same
    reference trajectory; a candidate whose error differs from the base
    error by more than a factor of two is flagged non-comparable.  Writes
    ``speedup.json`` and ``speedup.csv`` (header
    ``scheme,dt,time_threads,wall_s,error,speedup,comparable``).
    """
    os.makedirs(out_dir, exist_ok=True)
    runs = [
        {"scheme": config.scheme, "dt": config.dt, "time_threads": config.time_threads}
    ] + config.speedup_candidates
    all_dts = [run["dt"] for run in runs]
    reference_dt = min(all_dts) / 64.0 if config.reference_dt is None else config.reference_dt
    config.n_steps(reference_dt)
    intervals, reference_interval = _common_checkpoint_intervals(config, all_dts, reference_dt)
    reference = _reference_trajectory(config, reference_dt, reference_interval)
    measured = []
    for run, interval in zip(runs, intervals):
        if not config.thread_budget_check(config.space_threads, run["time_threads"]):
            raise ConfigError(
                f"candidate time_threads = {run['time_threads']} exceeds the core budget"
            )
        walls = []
        for _ in range(config.reps):
            problem = build_problem(config)
            state = build_initial_state(config, problem)
            stepper = build_stepper(
                config, scheme=run["scheme"], time_threads=run["time_threads"]
            )
            try:
                trajectory, wall_s = _timed_integrate(
                    problem,
                    state,
                    run["dt"],
                    config.n_steps(run["dt"]),
                    stepper,
                    checkpoint_interval=interval,
                )
            finally:
                _close_stepper(stepper)
            walls.append(wall_s)
        error = error_linf_l2(trajectory, reference, problem, relative=config.metric == "rel")
        measured.append(
            {
                "scheme": run["scheme"],
                "dt": run["dt"],
                "time_threads": run["time_threads"],
                "wall_s": min(walls),
                "error": error,
            }
        )
    base = measured[0]
    for entry in measured:
        entry["speedup"] = base["wall_s"] / entry["wall_s"]
        larger = max(entry["error"], base["error"])
        smaller = min(entry["error"], base["error"])
        entry["comparable"] = bool(smaller == 0.0 or larger <= 2.0 * smaller)
    report = {
        "base": base["scheme"],
        "metric": config.metric,
        "reference_scheme": config.reference_scheme,
        "reference_dt": reference_dt,
        "runs": measured,
        "environment": environment_info(),
    }
    with open(os.path.join(out_dir, "speedup.json"), "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "speedup.csv"), "w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=["scheme", "dt", "time_threads", "wall_s", "error", "speedup", "comparable"],
        )
        writer.writeheader()
        writer.writerows(measured)
    return report


def perf_model_report(config, out_dir):
    """Fit the cost model from sequential diagonal steps; writes ``perf_model.json``.

    When the config requests ``time_threads > 1`` within budget, parallel
    steps of the same problem are timed as well and the measured
    sequential-over-parallel ratio is reported next to the model's
    prediction.  Requires the dsdc scheme.
    """
    if config.scheme != "dsdc":
        raise ConfigError(f"perf-model requires scheme 'dsdc', got {config.scheme!r}")
    os.makedirs(out_dir, exist_ok=True)
    n_fit_steps = max(config.reps, 5) + 2
    problem = build_problem(config, space_threads=1)
    state = build_initial_state(config, problem)
    stepper = build_stepper(config, time_threads=1)
    try:
        trajectory, _ = _timed_integrate(problem, state, config.dt, n_fit_steps, stepper)
    finally:
        _close_stepper(stepper)
    # drop warmup steps so allocator and FFT planning noise stays out of the fit
    model = fit_costs(trajectory.reports[2:], n_nodes=config.n_nodes)
    s_measured = None
    if config.time_threads > 1 and config.thread_budget_check(1, config.time_threads):
        seq_wall = min(report.wall_s for report in trajectory.reports[2:])
        par_stepper = build_stepper(config, time_threads=config.time_threads)
        try:
            par_trajectory, _ = _timed_integrate(
                problem, trajectory.states[-1], config.dt, n_fit_steps, par_stepper
            )
        finally:
            _close_stepper(par_stepper)
        s_measured = seq_wall / min(report.wall_s for report in par_trajectory.reports[2:])
    report = perf_report(model, s_measured=s_measured)
    report["environment"] = environment_info()
    with open(os.path.join(out_dir, "perf_model.json"), "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
    return report
