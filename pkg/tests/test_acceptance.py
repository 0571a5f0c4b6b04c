"""Acceptance gate: one test per shipping criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the measured
values.  Criteria that depend on hardware (parallel speedup floors, wall-time
crossings) are marked ``soft`` and skip with an explanation when the machine
cannot support them; everything else runs everywhere.
"""

import time

import numpy as np
import psutil
import pytest

from parsdc.collocation import CollocationTable, DiagonalPreconditioner
from parsdc.core import evaluation_counters, initialize_sweep
from parsdc.integrators import (
    Ab2SiStepper,
    DiagonalSdcStepper,
    ExplicitSpacing,
    ImexO2Stepper,
    SdcConfig,
    SweepMode,
    diagonal_sweep,
    dsdc_step,
    integrate,
    sdc_step_serial,
    serial_sweep,
)
from parsdc.perfmodel import theoretical_speedup
from parsdc.problems import DahlquistProblem, JetConfig, PlanarShallowWater, jet_initial_condition

PHYSICAL_CORES = psutil.cpu_count(logical=False) or 1


def report(index, ok, detail):
    print(f"criterion {index}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def skip(index, reason):
    print(f"criterion {index}: SKIP — {reason}")
    pytest.skip(reason)


def dense_collocation(lambda_impl, lambda_expl, table, dt, u_n):
    lam = lambda_impl + lambda_expl
    m = table.n_nodes
    system = np.eye(m, dtype=complex) - dt * lam * table.q_matrix
    return np.linalg.solve(system, np.full(m, u_n, dtype=complex))


def test_criterion_1_performance_model():
    s_r03 = theoretical_speedup(4, 0.3)
    s_r0 = theoretical_speedup(4, 0.0)
    s_limit = theoretical_speedup(4, 1e6)
    ok = abs(s_r03 - 3.39) <= 0.005 and s_r0 == 3.25 and abs(s_limit - 4.0) <= 1e-4
    report(
        1,
        ok,
        f"speedup model: S(4,0.3)={s_r03:.4f} (|Δ|={abs(s_r03 - 3.39):.4f} ≤ 0.005), "
        f"S(4,0)={s_r0} exact, S(4,1e6)−4={s_limit - 4.0:+.2e} (|Δ| ≤ 1e-4)",
    )


def test_criterion_2_collocation_oracle_equivalence():
    lambda_impl, lambda_expl, dt = -1.0, 0.2, 0.1
    worst_step = 0.0
    for n_nodes in (2, 3, 4):
        table = CollocationTable.radau_right(n_nodes)
        expected = dense_collocation(lambda_impl, lambda_expl, table, dt, 1.0)[-1]
        problem = DahlquistProblem(lambda_impl=lambda_impl, lambda_expl=lambda_expl)
        u_serial, _ = sdc_step_serial(
            problem,
            np.array([1.0 + 0.0j]),
            dt,
            SdcConfig(table=table, n_sweeps=20, mode=SweepMode.SERIAL),
        )
        u_diag, _ = dsdc_step(
            problem,
            np.array([1.0 + 0.0j]),
            dt,
            SdcConfig(table=table, n_sweeps=20, mode=SweepMode.DIAGONAL_SEQUENTIAL),
        )
        worst_step = max(worst_step, abs(u_serial[0] - expected), abs(u_diag[0] - expected))

    # fixed-point invariance of single sweeps
    table = CollocationTable.radau_right(4)
    nodes_solution = dense_collocation(lambda_impl, lambda_expl, table, dt, 1.0)
    worst_fp = 0.0
    for sweep_kind in ("serial", "diagonal"):
        problem = DahlquistProblem(lambda_impl=lambda_impl, lambda_expl=lambda_expl)
        state = initialize_sweep(problem, np.array([1.0 + 0.0j]), 4)
        for m in range(4):
            u_m = np.array([nodes_solution[m]])
            state.u[m] = u_m
            state.fe[m] = lambda_expl * u_m
            state.fi[m] = lambda_impl * u_m
        if sweep_kind == "serial":
            serial_sweep(problem, state, table, dt, ExplicitSpacing.FORWARD)
        else:
            diagonal_sweep(problem, state, table, dt, DiagonalPreconditioner.MIN_SR_FLEX, 1)
        for m in range(4):
            recovered = state.fi[m][0] / lambda_impl
            worst_fp = max(worst_fp, abs(recovered - nodes_solution[m]))
    ok = worst_step <= 1e-11 and worst_fp <= 1e-12
    report(
        2,
        ok,
        f"collocation oracle: max |u_M(K=20) − dense| = {worst_step:.2e} ≤ 1e-11 over "
        f"M ∈ {{2,3,4}} (serial and diagonal); fixed-point sweep residual = {worst_fp:.2e} ≤ 1e-12",
    )


def test_criterion_3_convergence_orders():
    # diagonal SDC, order from the exact Dahlquist solution
    problem = DahlquistProblem(lambda_impl=-1.0, lambda_expl=0.3)
    u0 = np.array([1.0 + 0.0j])
    errors, dts = [], []
    for n_steps in (8, 16, 32, 64):
        dt = 1.0 / n_steps
        cfg = SdcConfig(
            table=CollocationTable.radau_right(4), n_sweeps=4, mode=SweepMode.DIAGONAL_SEQUENTIAL
        )
        trajectory = integrate(problem, u0, dt, n_steps, DiagonalSdcStepper(cfg))
        errors.append(abs(trajectory.states[-1][0] - problem.exact(1.0, u0)[0]))
        dts.append(dt)
    slope_dsdc = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])

    errors, dts = [], []
    for n_steps in (8, 16, 32, 64):
        dt = 1.0 / n_steps
        trajectory = integrate(problem, u0, dt, n_steps, ImexO2Stepper())
        errors.append(abs(trajectory.states[-1][0] - problem.exact(1.0, u0)[0]))
        dts.append(dt)
    slope_imex = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])

    # semi-implicit two-step scheme on the perturbed jet, fine reference
    swe = PlanarShallowWater(
        n_grid=24, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    state0 = jet_initial_condition(swe, JetConfig(perturbation_amplitude=1e-3))
    t_end = 480.0
    reference = integrate(swe, state0, t_end / 512, 512, ImexO2Stepper()).states[-1]
    errors, dts = [], []
    for n_steps in (8, 16, 32):
        dt = t_end / n_steps
        final = integrate(swe, state0, dt, n_steps, Ab2SiStepper()).states[-1]
        errors.append(float(np.linalg.norm(final - reference)))
        dts.append(dt)
    slope_ab2 = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])

    ok = slope_dsdc >= 3.5 and 1.7 <= slope_imex <= 2.3 and 0.7 <= slope_ab2 <= 1.3
    report(
        3,
        ok,
        f"convergence orders: dSDC {slope_dsdc:.2f} (≥ 3.5), IMEX-o2 {slope_imex:.2f} "
        f"(∈ [1.7, 2.3]), AB2-SI {slope_ab2:.2f} (∈ [0.7, 1.3])",
    )


def test_criterion_4_thread_count_determinism():
    table = CollocationTable.radau_right(4)

    def run(problem, state, dt, threads):
        mode = SweepMode.DIAGONAL_PARALLEL if threads > 1 else SweepMode.DIAGONAL_SEQUENTIAL
        with SdcConfig(table=table, n_sweeps=4, mode=mode, time_threads=threads) as cfg:
            trajectory = integrate(problem, state, dt, 20, DiagonalSdcStepper(cfg))
        return trajectory.states[-1]

    identical = True
    for label, make in (
        (
            "dahlquist",
            lambda: (
                DahlquistProblem(lambda_impl=-1.0, lambda_expl=0.2, width=16),
                (np.linspace(0.5, 1.5, 16) + 0.25j).astype(complex),
                0.05,
            ),
        ),
        (
            "planar-swe",
            lambda: (
                PlanarShallowWater(
                    n_grid=32, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
                ),
                None,
                60.0,
            ),
        ),
    ):
        finals = []
        for threads in (1, 2, 4):
            problem, state, dt = make()
            if state is None:
                state = jet_initial_condition(problem, JetConfig(perturbation_amplitude=1e-4))
            finals.append(run(problem, state, dt, threads))
        identical = identical and all(np.array_equal(finals[0], f) for f in finals[1:])
    report(
        4,
        identical,
        "dSDC final state bit-for-bit identical for time_threads ∈ {1, 2, 4} over 20 steps "
        "on both problems",
    )


@pytest.mark.soft
def test_criterion_5_parallel_speedup_floor():
    if PHYSICAL_CORES < 4:
        skip(
            5,
            f"needs ≥ 4 physical cores for a meaningful time-parallel measurement, found "
            f"{PHYSICAL_CORES}; model prediction S(4,0) = {theoretical_speedup(4, 0.0)} "
            f"is reported by the perf-model subcommand on capable machines",
        )
    problem = PlanarShallowWater(
        n_grid=256, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    state = jet_initial_condition(problem, JetConfig())
    table = CollocationTable.radau_right(4)
    n_steps = 5
    seq_cfg = SdcConfig(table=table, n_sweeps=4, mode=SweepMode.DIAGONAL_SEQUENTIAL)
    seq = integrate(problem, state, 30.0, n_steps, DiagonalSdcStepper(seq_cfg))
    with SdcConfig(
        table=table, n_sweeps=4, mode=SweepMode.DIAGONAL_PARALLEL, time_threads=4
    ) as par_cfg:
        par = integrate(problem, state, 30.0, n_steps, DiagonalSdcStepper(par_cfg))
    seq_wall = min(r.wall_s for r in seq.reports)
    par_wall = min(r.wall_s for r in par.reports)
    measured = seq_wall / par_wall
    report(
        5,
        measured >= 2.0,
        f"time-parallel speedup on N=256: measured {measured:.2f}x (floor 2.0), model "
        f"prediction {theoretical_speedup(4, 0.0)}",
    )


def test_criterion_6_conservation_suite():
    problem = PlanarShallowWater(
        n_grid=64, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    state = jet_initial_condition(problem, JetConfig(perturbation_amplitude=1e-4))
    # give the geopotential anomaly a nonzero mean so relative drift is measurable
    phi, _, _ = problem.spectral_views(state)
    phi[0, 0] += 0.02 * problem.mean_geopotential * problem.n_grid**2
    mean_before = problem.mean_geopotential_anomaly(state)
    cfg = SdcConfig(
        table=CollocationTable.radau_right(4), n_sweeps=4, mode=SweepMode.DIAGONAL_SEQUENTIAL
    )
    trajectory = integrate(problem, state, 30.0, 100, DiagonalSdcStepper(cfg))
    final = trajectory.states[-1]
    mean_drift = abs(problem.mean_geopotential_anomaly(final) - mean_before) / abs(mean_before)

    # Hermitian symmetry: the packed spectrum must describe a real field
    symmetry = max(
        float(
            np.linalg.norm(problem._to_spectral(problem._to_physical(view)) - view)
            / np.linalg.norm(view)
        )
        for view in problem.spectral_views(final)
        if np.linalg.norm(view) > 0.0
    )

    steady_problem = PlanarShallowWater(
        n_grid=64, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    balanced = jet_initial_condition(steady_problem, JetConfig(perturbation_amplitude=0.0))
    steady = integrate(steady_problem, balanced, 30.0, 10, DiagonalSdcStepper(cfg))
    zeta_before = steady_problem.error_field(balanced)
    zeta_after = steady_problem.error_field(steady.states[-1])
    jet_drift = float(np.linalg.norm(zeta_after - zeta_before) / np.linalg.norm(zeta_before))

    ok = mean_drift <= 1e-10 and symmetry <= 1e-13 and jet_drift <= 1e-6
    report(
        6,
        ok,
        f"conservation: mean geopotential drift {mean_drift:.2e} ≤ 1e-10 over 100 steps; "
        f"Hermitian symmetry residual {symmetry:.2e} ≤ 1e-13; balanced jet vorticity change "
        f"{jet_drift:.2e} ≤ 1e-6 over 10 steps",
    )


def test_criterion_7_cost_structure_accounting():
    problem = DahlquistProblem(lambda_impl=-1.0, lambda_expl=0.2, width=8)
    retained = []
    cfg = SdcConfig(
        table=CollocationTable.radau_right(4), n_sweeps=4, mode=SweepMode.DIAGONAL_SEQUENTIAL
    )
    dsdc_step(
        problem,
        np.ones(8, dtype=complex),
        0.1,
        cfg,
        on_sweep=lambda k, state: retained.append(state.distinct_node_arrays() - 3),
    )
    counters = evaluation_counters(problem)
    ok = counters == (13, 13, 13) and all(r == 8 for r in retained)
    report(
        7,
        ok,
        f"cost structure: one dSDC step with M=K=4 used (n_fE, n_fI, n_solve) = {counters} "
        f"(expected (13, 13, 13)); node-level storage between sweeps = {set(retained)} "
        f"vectors (expected {{8}} = 2M, beyond the constant step-start triple)",
    )


@pytest.mark.soft
def test_criterion_8_work_precision_crossing():
    # stands in for production-scale measurements a desk machine cannot
    # reproduce: at tight accuracy the fourth-order method must win the
    # wall-time race against the second-order one
    problem_ctor = lambda: PlanarShallowWater(
        n_grid=128, domain_length=4.0e6, mean_geopotential=1.0e5, coriolis=1.0e-4
    )
    t_end = 960.0
    reference_problem = problem_ctor()
    state0 = jet_initial_condition(reference_problem, JetConfig(perturbation_amplitude=1e-3))
    ref_cfg = SdcConfig(
        table=CollocationTable.radau_right(4), n_sweeps=4, mode=SweepMode.DIAGONAL_SEQUENTIAL
    )
    reference = integrate(
        reference_problem, state0, t_end / 64, 64, DiagonalSdcStepper(ref_cfg)
    ).states[-1]
    ref_zeta = reference_problem.error_field(reference)

    def measure(stepper_factory, n_steps):
        problem = problem_ctor()
        stepper = stepper_factory()
        t0 = time.perf_counter()
        trajectory = integrate(problem, state0, t_end / n_steps, n_steps, stepper)
        wall = time.perf_counter() - t0
        err = float(
            np.linalg.norm(problem.error_field(trajectory.states[-1]) - ref_zeta)
            / np.linalg.norm(ref_zeta)
        )
        return wall, err

    dsdc_points = [
        measure(
            lambda: DiagonalSdcStepper(
                SdcConfig(
                    table=CollocationTable.radau_right(4),
                    n_sweeps=4,
                    mode=SweepMode.DIAGONAL_SEQUENTIAL,
                )
            ),
            n,
        )
        for n in (4, 8)
    ]
    imex_points = [measure(ImexO2Stepper, n) for n in (4, 8, 16, 32, 64)]
    # crossing: some dsdc point reaches the tightest accuracy the second-order
    # scheme managed, at lower cost than the cheapest imex run achieving it
    imex_best_err = min(err for _, err in imex_points)
    imex_best_wall = min(w for w, e in imex_points if e <= imex_best_err * (1 + 1e-12))
    crossing = any(
        err <= imex_best_err and wall < imex_best_wall for wall, err in dsdc_points
    )
    detail = (
        f"work-precision crossing on N=128: dsdc points (wall, err) = "
        f"{[(round(w, 3), f'{e:.1e}') for w, e in dsdc_points]}, imex-o2 points = "
        f"{[(round(w, 3), f'{e:.1e}') for w, e in imex_points]}"
    )
    report(8, crossing, detail)
