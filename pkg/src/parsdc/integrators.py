"""Time steppers: deferred-correction sweeps and the reference schemes.

Two sweep flavors share the collocation machinery.  The serial sweep updates
nodes in sequence and feeds each refreshed tendency into the right-hand sides
of the nodes above it within the same pass.  The diagonal sweep decouples the
nodes: every right-hand side is assembled from the previous iterate only, so
the per-node solves and tendency refreshes are independent and can run on a
thread pool.  Both leave the collocation solution invariant, which is the
correctness anchor used by the tests.

A diagonal step with K sweeps runs K - 1 full sweeps and then solves only the
last node (the step result) from the final iterate, skipping the tendency
refresh there.  Work in tendency evaluations and solves is therefore exactly
``n_f = 1 + (K - 1) M`` of each kind plus ``(K - 1) M + 1`` solves, and the
serial step costs ``1 + K M`` evaluations of each kind with ``K M`` solves.

Between sweeps a diagonal step retains two tendency vectors per node plus the
step-start triple; node solutions are dropped as soon as their tendencies have
been evaluated.  ``SweepState.distinct_node_arrays`` observes this and the
tests pin it to ``2 M + 3``.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .collocation import CollocationTable, DiagonalPreconditioner, diagonal_coefficients
from .core import check_finite, evaluation_counters, initialize_sweep
from .errors import ConfigError, DivergenceError, NumericalError, ParameterError, SolveError

__all__ = [
    "AB2_THETA",
    "AB2_WEIGHT_CURRENT",
    "AB2_WEIGHT_PREVIOUS",
    "Ab2SiStepper",
    "DiagonalSdcStepper",
    "ExplicitSpacing",
    "ImexO2Stepper",
    "SdcConfig",
    "SerialSdcStepper",
    "StepReport",
    "SweepMode",
    "Trajectory",
    "ab2_si_step",
    "diagonal_sweep",
    "dsdc_step",
    "imex_o2_step",
    "integrate",
    "sdc_step_serial",
    "serial_sweep",
]

# off-centering and history weights of the two-step semi-implicit scheme;
# the explicit weights are Adams-Bashforth-2 shifted by 0.1 for robustness
# and still sum to one
AB2_THETA = 3.0 / 5.0
AB2_WEIGHT_CURRENT = 1.5 + 0.1
AB2_WEIGHT_PREVIOUS = -(0.5 + 0.1)


class SweepMode(Enum):
    """How node updates within one sweep are ordered and executed."""

    SERIAL = "serial"
    DIAGONAL_SEQUENTIAL = "diagonal-sequential"
    DIAGONAL_PARALLEL = "diagonal-parallel"


class ExplicitSpacing(Enum):
    """Node spacing that weights refreshed explicit tendencies in a serial sweep.

    ``FORWARD`` weights the correction from node j by the spacing ahead of it
    (the interval an explicit Euler substep starting at node j would cross);
    ``BACKWARD`` uses the spacing behind node j, mirroring the implicit
    weights.  The choice moves individual sweeps, not the fixed point: both
    variants leave the collocation solution invariant and converge to it.
    """

    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass
class SdcConfig:
    """Parameters of a deferred-correction step.

    ``n_sweeps`` defaults to the node count, which matches the diagonal
    preconditioner policy of running as many sweeps as nodes.  A thread pool
    is created lazily on first parallel use and reused across steps; call
    :meth:`close` (or use the config as a context manager) to release it.
    """

    table: CollocationTable
    n_sweeps: int = None
    preconditioner: DiagonalPreconditioner = DiagonalPreconditioner.MIN_SR_FLEX
    mode: SweepMode = SweepMode.SERIAL
    time_threads: int = 1
    explicit_spacing: ExplicitSpacing = ExplicitSpacing.FORWARD
    _pool: ThreadPoolExecutor = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_sweeps is None:
            self.n_sweeps = self.table.n_nodes
        if not isinstance(self.n_sweeps, int) or self.n_sweeps < 1:
            raise ParameterError(f"sweep count must be a positive integer, got {self.n_sweeps!r}")
        if not isinstance(self.time_threads, int) or self.time_threads < 1:
            raise ParameterError(f"time_threads must be a positive integer, got {self.time_threads!r}")
        if self.time_threads > 1 and self.mode is not SweepMode.DIAGONAL_PARALLEL:
            raise ParameterError(
                f"time_threads = {self.time_threads} requires mode {SweepMode.DIAGONAL_PARALLEL}, "
                f"got {self.mode}"
            )
        if self.time_threads > self.table.n_nodes:
            raise ParameterError(
                f"time_threads = {self.time_threads} exceeds the {self.table.n_nodes} collocation nodes"
            )

    def executor(self):
        """Thread pool for parallel sweeps, or ``None`` when running on one thread."""
        if self.time_threads <= 1:
            return None
        if self._pool is None:
            try:
                self._pool = ThreadPoolExecutor(
                    max_workers=self.time_threads, thread_name_prefix="sdc-node"
                )
            except Exception as exc:
                raise ConfigError(f"could not start {self.time_threads} worker threads: {exc}") from exc
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


@dataclass(frozen=True)
class StepReport:
    """Wall-clock and work accounting of a single step.

    ``init_s`` times the step-start tendency evaluations, each entry of
    ``sweep_s`` one full sweep, and ``final_node_s`` the closing last-node
    solve of a diagonal step (zero for schemes without that stage).  Counter
    fields are per-step deltas.
    """

    wall_s: float
    init_s: float
    sweep_s: tuple
    final_node_s: float
    n_f_expl: int
    n_f_impl: int
    n_solve: int


def _report(problem, counters_before, wall_s, init_s=0.0, sweep_s=(), final_node_s=0.0):
    n_f_expl, n_f_impl, n_solve = (
        after - before for after, before in zip(evaluation_counters(problem), counters_before)
    )
    return StepReport(
        wall_s=wall_s,
        init_s=init_s,
        sweep_s=tuple(sweep_s),
        final_node_s=final_node_s,
        n_f_expl=n_f_expl,
        n_f_impl=n_f_impl,
        n_solve=n_solve,
    )


# -- sweeps ------------------------------------------------------------------


def serial_sweep(problem, state, table, dt, explicit_spacing=ExplicitSpacing.FORWARD, sweep_index=0):
    """One in-order pass over all nodes; returns the new last-node solution.

    Each node solve sees the quadrature of the previous iterate plus the
    accumulated corrections from the nodes already updated in this pass.  The
    correction weights are constant across the nodes above the contributing
    one, so a single running accumulator suffices.
    """
    n_nodes = table.n_nodes
    dtau = table.dtau
    if explicit_spacing is ExplicitSpacing.FORWARD:
        expl_w = np.append(dtau[1:], 0.0)
    else:
        expl_w = dtau
    # quadrature of the previous iterate, assembled before any slot changes
    quad = []
    for m in range(n_nodes):
        acc = state.u0.copy()
        for j in range(n_nodes):
            weight = dt * table.q_matrix[m, j]
            acc += weight * state.fe[j]
            acc += weight * state.fi[j]
        quad.append(acc)
    correction = np.zeros_like(state.u0)
    u_m = None
    for m in range(n_nodes):
        alpha = dt * dtau[m]
        beta = quad[m]
        beta += correction
        beta -= alpha * state.fi[m]
        try:
            u_m = problem.implicit_solve(alpha, beta, guess=beta)
        except Exception as exc:
            raise SolveError(
                f"implicit solve failed at node {m + 1}, sweep {sweep_index}: {exc}",
                node=m + 1,
                sweep=sweep_index,
            ) from exc
        fe_new = problem.f_expl(u_m)
        fi_new = problem.f_impl(u_m)
        if m + 1 < n_nodes:
            correction += (dt * expl_w[m]) * (fe_new - state.fe[m])
            correction += (dt * dtau[m]) * (fi_new - state.fi[m])
        state.fe[m] = fe_new
        state.fi[m] = fi_new
        state.u[m] = None
    state.u[-1] = u_m
    return u_m


def _refresh_node(problem, state, dt, diag, m, sweep_index):
    """Solve node m from its pre-assembled right-hand side and refresh its tendencies."""
    beta = state.fi[m]
    try:
        u_m = problem.implicit_solve(dt * diag[m], beta, guess=beta)
    except Exception as exc:
        raise SolveError(
            f"implicit solve failed at node {m + 1}, sweep {sweep_index}: {exc}",
            node=m + 1,
            sweep=sweep_index,
        ) from exc
    state.fe[m] = problem.f_expl(u_m)
    state.fi[m] = problem.f_impl(u_m)
    state.u[m] = None


def _refresh_batch(problem, state, dt, diag, nodes, sweep_index):
    for m in nodes:
        _refresh_node(problem, state, dt, diag, m, sweep_index)


def diagonal_sweep(
    problem, state, table, dt, preconditioner, sweep_index, executor=None, time_threads=1
):
    """One decoupled pass: all node solves read only the previous iterate.

    Phase one folds the implicit tendency of each node into its explicit slot
    (the right-hand sides need only the sum) and then overwrites the implicit
    slot with the node's solve right-hand side; both are pure rebinds, each
    slot is read for the last time before it is replaced.  Phase two solves
    and re-evaluates every node independently, on the caller's thread or on
    the supplied pool with node m handled by worker ``m % time_threads``.
    The static assignment keeps the floating-point work of each node
    identical for every thread count, so results are bitwise reproducible.
    """
    n_nodes = table.n_nodes
    diag = diagonal_coefficients(preconditioner, table, sweep_index)
    for j in range(n_nodes):
        state.fe[j] = state.fe[j] + state.fi[j]
    for m in range(n_nodes):
        beta = state.u0.copy()
        for j in range(n_nodes):
            beta += (dt * table.q_matrix[m, j]) * state.fe[j]
        beta -= (dt * diag[m]) * state.fi[m]
        state.fi[m] = beta
    if executor is None or time_threads <= 1:
        _refresh_batch(problem, state, dt, diag, range(n_nodes), sweep_index)
    else:
        futures = [
            executor.submit(
                _refresh_batch, problem, state, dt, diag, range(w, n_nodes, time_threads), sweep_index
            )
            for w in range(time_threads)
        ]
        for future in futures:
            future.result()


def _final_node_solve(problem, state, table, dt, preconditioner, sweep_index):
    """Closing solve of a diagonal step: last node only, no tendency refresh."""
    n_nodes = table.n_nodes
    last = n_nodes - 1
    diag = diagonal_coefficients(preconditioner, table, sweep_index)
    beta = state.u0.copy()
    for j in range(n_nodes):
        weight = dt * table.q_matrix[last, j]
        beta += weight * state.fe[j]
        beta += weight * state.fi[j]
    beta -= (dt * diag[last]) * state.fi[last]
    try:
        u_last = problem.implicit_solve(dt * diag[last], beta, guess=beta)
    except Exception as exc:
        raise SolveError(
            f"implicit solve failed at node {last + 1}, sweep {sweep_index}: {exc}",
            node=last + 1,
            sweep=sweep_index,
        ) from exc
    state.u[last] = u_last
    return u_last


# -- deferred-correction steps -------------------------------------------------


def sdc_step_serial(problem, u_n, dt, cfg, on_sweep=None):
    """Advance one step with ``cfg.n_sweeps`` serial sweeps; returns ``(u, report)``.

    Every sweep updates all nodes in order with implicit weights given by the
    node spacings; the last node of the final sweep is the step result.
    """
    if cfg.mode is not SweepMode.SERIAL:
        raise ParameterError(f"serial step requires mode {SweepMode.SERIAL}, got {cfg.mode}")
    counters_before = evaluation_counters(problem)
    t_start = time.perf_counter()
    state = initialize_sweep(problem, u_n, cfg.table.n_nodes)
    init_s = time.perf_counter() - t_start
    sweep_s = []
    u_next = None
    for k in range(1, cfg.n_sweeps + 1):
        t_sweep = time.perf_counter()
        u_next = serial_sweep(problem, state, cfg.table, dt, cfg.explicit_spacing, sweep_index=k)
        sweep_s.append(time.perf_counter() - t_sweep)
        if on_sweep is not None:
            on_sweep(k, state)
    report = _report(
        problem,
        counters_before,
        wall_s=time.perf_counter() - t_start,
        init_s=init_s,
        sweep_s=sweep_s,
    )
    return u_next, report


def dsdc_step(problem, u_n, dt, cfg, on_sweep=None):
    """Advance one step with diagonal sweeps; returns ``(u, report)``.

    Runs ``cfg.n_sweeps - 1`` full sweeps and closes with the last-node solve
    at sweep index ``cfg.n_sweeps``; no tendencies are evaluated after that
    solve.  In parallel mode the sweeps run on the config's thread pool.
    """
    if cfg.mode is SweepMode.SERIAL:
        raise ParameterError(f"diagonal step requires a diagonal mode, got {cfg.mode}")
    executor = cfg.executor() if cfg.mode is SweepMode.DIAGONAL_PARALLEL else None
    counters_before = evaluation_counters(problem)
    t_start = time.perf_counter()
    state = initialize_sweep(problem, u_n, cfg.table.n_nodes)
    init_s = time.perf_counter() - t_start
    sweep_s = []
    for k in range(1, cfg.n_sweeps):
        t_sweep = time.perf_counter()
        diagonal_sweep(
            problem, state, cfg.table, dt, cfg.preconditioner, k, executor, cfg.time_threads
        )
        sweep_s.append(time.perf_counter() - t_sweep)
        if on_sweep is not None:
            on_sweep(k, state)
    t_final = time.perf_counter()
    u_next = _final_node_solve(problem, state, cfg.table, dt, cfg.preconditioner, cfg.n_sweeps)
    final_node_s = time.perf_counter() - t_final
    report = _report(
        problem,
        counters_before,
        wall_s=time.perf_counter() - t_start,
        init_s=init_s,
        sweep_s=sweep_s,
        final_node_s=final_node_s,
    )
    return u_next, report


# -- reference schemes ----------------------------------------------------------


def _half_step_trapezoidal(problem, state, dt):
    # (I - dt/4 f_I) u = (I + dt/4 f_I) state, a trapezoidal rule over dt/2
    beta = state + (0.25 * dt) * problem.f_impl(state)
    return problem.implicit_solve(0.25 * dt, beta, guess=beta)


def imex_o2_step(problem, state, dt):
    """Strang-split second-order step: implicit half, explicit full, implicit half.

    The implicit halves are trapezoidal; the explicit middle stage is one Heun
    step over the full interval.
    """
    u = _half_step_trapezoidal(problem, state, dt)
    rate = problem.f_expl(u)
    predictor = u + dt * rate
    u = u + (0.5 * dt) * rate + (0.5 * dt) * problem.f_expl(predictor)
    return _half_step_trapezoidal(problem, u, dt)


def _theta_step(problem, state, dt, f_expl_now, f_expl_prev):
    beta = state + (dt * (1.0 - AB2_THETA)) * problem.f_impl(state)
    beta += (dt * AB2_WEIGHT_CURRENT) * f_expl_now
    beta += (dt * AB2_WEIGHT_PREVIOUS) * f_expl_prev
    return problem.implicit_solve(AB2_THETA * dt, beta, guess=beta)


def ab2_si_step(problem, state, state_prev, dt):
    """Semi-implicit two-step scheme: off-centered implicit part, two-point explicit history.

    The implicit part is a theta scheme with ``theta = 3/5``, slightly past
    midpoint for stability at the cost of one formal order; the explicit part
    extrapolates from the current and previous states.
    """
    return _theta_step(problem, state, dt, problem.f_expl(state), problem.f_expl(state_prev))


# -- stepper adapters and the driver ---------------------------------------------


class SerialSdcStepper:
    """Adapter running :func:`sdc_step_serial` under :func:`integrate`."""

    name = "sdc-serial"

    def __init__(self, cfg):
        if cfg.mode is not SweepMode.SERIAL:
            raise ParameterError(f"serial stepper requires mode {SweepMode.SERIAL}, got {cfg.mode}")
        self.cfg = cfg

    def reset(self):
        pass

    def step(self, problem, state, dt):
        return sdc_step_serial(problem, state, dt, self.cfg)


class DiagonalSdcStepper:
    """Adapter running :func:`dsdc_step` under :func:`integrate`."""

    name = "dsdc"

    def __init__(self, cfg):
        if cfg.mode is SweepMode.SERIAL:
            raise ParameterError(f"diagonal stepper requires a diagonal mode, got {cfg.mode}")
        self.cfg = cfg

    def reset(self):
        pass

    def step(self, problem, state, dt):
        return dsdc_step(problem, state, dt, self.cfg)


class ImexO2Stepper:
    """Adapter running :func:`imex_o2_step` under :func:`integrate`."""

    name = "imex-o2"

    def reset(self):
        pass

    def step(self, problem, state, dt):
        counters_before = evaluation_counters(problem)
        t_start = time.perf_counter()
        u_next = imex_o2_step(problem, state, dt)
        return u_next, _report(problem, counters_before, wall_s=time.perf_counter() - t_start)


class Ab2SiStepper:
    """Two-step scheme with cached explicit history, bootstrapped by one second-order step.

    The explicit tendency of the current state is evaluated once per step and
    kept for the next one, so the two-point history costs a single evaluation
    per step after the first.
    """

    name = "ab2-si"

    def __init__(self):
        self._f_expl_prev = None

    def reset(self):
        self._f_expl_prev = None

    def step(self, problem, state, dt):
        counters_before = evaluation_counters(problem)
        t_start = time.perf_counter()
        if self._f_expl_prev is None:
            # no history yet: record the starting tendency, advance second order
            self._f_expl_prev = problem.f_expl(state)
            u_next = imex_o2_step(problem, state, dt)
        else:
            f_expl_now = problem.f_expl(state)
            u_next = _theta_step(problem, state, dt, f_expl_now, self._f_expl_prev)
            self._f_expl_prev = f_expl_now
        return u_next, _report(problem, counters_before, wall_s=time.perf_counter() - t_start)


@dataclass
class Trajectory:
    """Checkpointed result of a fixed-step integration."""

    scheme: str
    dt: float
    n_steps: int
    times: list
    states: list
    reports: list


def integrate(problem, initial_state, dt, n_steps, stepper, checkpoint_interval=None):
    """March ``n_steps`` fixed steps, checkpointing states and per-step reports.

    Checkpoints always include the initial and final state; with a
    ``checkpoint_interval`` every interval-th step is recorded as well.
    Floating-point traps are suppressed inside the loop and divergence is
    detected instead by checking each new state, raising
    :class:`DivergenceError` with the one-based step index.
    """
    if dt <= 0.0:
        raise ParameterError(f"step size must be positive, got {dt}")
    if n_steps < 1:
        raise ParameterError(f"step count must be at least 1, got {n_steps}")
    if checkpoint_interval is not None and checkpoint_interval < 1:
        raise ParameterError(f"checkpoint interval must be at least 1, got {checkpoint_interval}")
    stepper.reset()
    state = np.array(initial_state, copy=True)
    check_finite(state)
    times = [0.0]
    states = [state.copy()]
    reports = []
    with np.errstate(all="ignore"):
        for step in range(1, n_steps + 1):
            state, report = stepper.step(problem, state, dt)
            reports.append(report)
            try:
                check_finite(state)
            except NumericalError as exc:
                raise DivergenceError(
                    f"{stepper.name} diverged at step {step} of {n_steps} (t = {step * dt:g}): {exc}",
                    step_index=step,
                ) from exc
            if step == n_steps or (checkpoint_interval is not None and step % checkpoint_interval == 0):
                times.append(step * dt)
                states.append(state.copy())
    return Trajectory(
        scheme=stepper.name, dt=dt, n_steps=n_steps, times=times, states=states, reports=reports
    )
