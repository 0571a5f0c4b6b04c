"""Benchmark configuration: TOML schema, validation, and object construction.

One file fully determines a run.  Schema by section:

``[problem]``
    ``kind = "dahlquist"`` with ``lambda_impl``/``lambda_expl`` (float or
    ``[re, im]`` pair) and ``width``; or ``kind = "planar-swe"`` with
    ``n_grid``, ``domain_length``, ``mean_geopotential``, ``coriolis`` and
    optional ``hyperviscosity``, plus an optional ``[problem.jet]`` table
    (``u_max``, ``y_center``, ``width``, ``perturbation_amplitude``,
    ``perturbation_wavenumber``).

``[stepper]``
    ``scheme`` in {"dsdc", "sdc-serial", "imex-o2", "ab2-si"}; SDC schemes
    take ``n_nodes``, ``n_sweeps`` and ``preconditioner`` ("min-sr-flex" or
    "implicit-euler"); ``dt`` (single run) or ``dt_list`` (sweeps).

``[run]``
    ``t_end`` plus optional ``checkpoint_interval`` (steps),
    ``space_threads``, ``time_threads``, ``core_budget`` (defaults to the
    machine's physical cores) and ``reps``.

``[metric]``
    ``kind = "rel"`` (default) or ``"abs"``.

``[reference]``
    optional override of the reference trajectory: ``scheme`` and ``dt``.

``[workprecision]``
    ``schemes`` list for the work-precision sweep (each reusing the
    ``[stepper]`` SDC parameters where applicable).

``[scaling]``
    ``splits`` as a list of ``[space_threads, time_threads]`` pairs.

``[[speedup.candidate]]``
    candidate tables with ``scheme`` and ``dt``; the base scheme runs at
    ``[stepper]`` settings.

Every step size must divide ``t_end`` to one part in 1e9; thread products
must stay within the core budget.
"""

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import psutil

from ..collocation import MAX_NODES, DiagonalPreconditioner
from ..errors import ConfigError

__all__ = ["ExperimentConfig", "SCHEMES", "load_config", "physical_core_count"]

SCHEMES = ("dsdc", "sdc-serial", "imex-o2", "ab2-si")

_PRECONDITIONERS = {
    "min-sr-flex": DiagonalPreconditioner.MIN_SR_FLEX,
    "implicit-euler": DiagonalPreconditioner.IMPLICIT_EULER_DTAU,
}


def physical_core_count():
    """Physical cores of this machine, at least 1."""
    count = psutil.cpu_count(logical=False)
    if count is None:
        count = psutil.cpu_count(logical=True)
    return max(int(count or 1), 1)


def _get(table, key, kinds, default=None, required=False, context=""):
    if key not in table:
        if required:
            raise ConfigError(f"missing required key '{key}'{context}")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, kinds):
        names = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"key '{key}'{context} must be {names}, got {value!r}")
    return value


def _as_complex(value, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        return complex(value[0], value[1])
    raise ConfigError(f"key '{key}' must be a number or a [re, im] pair, got {value!r}")


def _positive(value, key):
    if value <= 0:
        raise ConfigError(f"key '{key}' must be positive, got {value}")
    return value


@dataclass
class ExperimentConfig:
    """Validated benchmark configuration; see the module docstring for the schema."""

    title: str
    problem_kind: str
    problem_params: dict
    jet_params: dict
    scheme: str
    n_nodes: int
    n_sweeps: int
    preconditioner: DiagonalPreconditioner
    dt: float
    dt_list: list
    t_end: float
    checkpoint_interval: int
    space_threads: int
    time_threads: int
    core_budget: int
    reps: int
    metric: str
    reference_scheme: str
    reference_dt: float
    wp_schemes: list
    scaling_splits: list
    speedup_candidates: list
    raw: dict = field(repr=False, default_factory=dict)

    def n_steps(self, dt=None):
        """Step count for ``dt`` (default: the configured one); must divide ``t_end``."""
        dt = self.dt if dt is None else dt
        steps = self.t_end / dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)) or round(steps) < 1:
            raise ConfigError(f"dt = {dt} does not divide t_end = {self.t_end}")
        return int(round(steps))

    def thread_budget_check(self, space_threads=None, time_threads=None):
        space = self.space_threads if space_threads is None else space_threads
        time = self.time_threads if time_threads is None else time_threads
        return space * time <= self.core_budget


def load_config(path, overrides=None):
    """Parse and validate a TOML config file; ``overrides`` wins over the file.

    Supported override keys: space_threads, time_threads, reps, metric.
    """
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    overrides = overrides or {}

    problem = raw.get("problem")
    if not isinstance(problem, dict):
        raise ConfigError("missing [problem] section")
    kind = _get(problem, "kind", str, required=True, context=" in [problem]")
    jet_params = {}
    if kind == "dahlquist":
        problem_params = {
            "lambda_impl": _as_complex(
                problem.get("lambda_impl", -1.0), "problem.lambda_impl"
            ),
            "lambda_expl": _as_complex(
                problem.get("lambda_expl", 0.0), "problem.lambda_expl"
            ),
            "width": _positive(
                _get(problem, "width", int, default=1, context=" in [problem]"), "problem.width"
            ),
        }
    elif kind == "planar-swe":
        problem_params = {
            "n_grid": _positive(
                _get(problem, "n_grid", int, required=True, context=" in [problem]"),
                "problem.n_grid",
            ),
            "domain_length": _positive(
                float(
                    _get(
                        problem, "domain_length", (int, float), default=4.0e6, context=" in [problem]"
                    )
                ),
                "problem.domain_length",
            ),
            "mean_geopotential": _positive(
                float(
                    _get(
                        problem,
                        "mean_geopotential",
                        (int, float),
                        default=1.0e5,
                        context=" in [problem]",
                    )
                ),
                "problem.mean_geopotential",
            ),
            "coriolis": float(
                _get(problem, "coriolis", (int, float), default=1.0e-4, context=" in [problem]")
            ),
            "hyperviscosity": float(
                _get(problem, "hyperviscosity", (int, float), default=0.0, context=" in [problem]")
            ),
        }
        jet = problem.get("jet", {})
        if not isinstance(jet, dict):
            raise ConfigError("[problem.jet] must be a table")
        jet_params = {
            "u_max": float(_get(jet, "u_max", (int, float), default=80.0, context=" in [problem.jet]")),
            "perturbation_amplitude": float(
                _get(
                    jet,
                    "perturbation_amplitude",
                    (int, float),
                    default=1.0e-4,
                    context=" in [problem.jet]",
                )
            ),
            "perturbation_wavenumber": _get(
                jet, "perturbation_wavenumber", int, default=3, context=" in [problem.jet]"
            ),
        }
        for optional in ("y_center", "width"):
            if optional in jet:
                jet_params[optional] = float(
                    _get(jet, optional, (int, float), context=" in [problem.jet]")
                )
    else:
        raise ConfigError(f"unknown problem kind {kind!r}; expected 'dahlquist' or 'planar-swe'")

    stepper = raw.get("stepper")
    if not isinstance(stepper, dict):
        raise ConfigError("missing [stepper] section")
    scheme = _get(stepper, "scheme", str, required=True, context=" in [stepper]")
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    n_nodes = _get(stepper, "n_nodes", int, default=4, context=" in [stepper]")
    if not 1 <= n_nodes <= MAX_NODES:
        raise ConfigError(f"stepper.n_nodes must be in 1..{MAX_NODES}, got {n_nodes}")
    n_sweeps = _get(stepper, "n_sweeps", int, default=n_nodes, context=" in [stepper]")
    _positive(n_sweeps, "stepper.n_sweeps")
    preconditioner_name = _get(
        stepper, "preconditioner", str, default="min-sr-flex", context=" in [stepper]"
    )
    if preconditioner_name not in _PRECONDITIONERS:
        raise ConfigError(
            f"unknown preconditioner {preconditioner_name!r}; expected one of "
            f"{sorted(_PRECONDITIONERS)}"
        )
    dt = stepper.get("dt")
    dt_list = stepper.get("dt_list")
    if dt is None and dt_list is None:
        raise ConfigError("[stepper] needs 'dt' or 'dt_list'")
    if dt is not None:
        dt = _positive(float(_get(stepper, "dt", (int, float), context=" in [stepper]")), "stepper.dt")
    if dt_list is not None:
        if not isinstance(dt_list, list) or not dt_list:
            raise ConfigError("stepper.dt_list must be a non-empty list of step sizes")
        dt_list = [
            _positive(float(v), f"stepper.dt_list[{i}]")
            for i, v in enumerate(dt_list)
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        ]
        if len(dt_list) != len(stepper["dt_list"]):
            raise ConfigError("stepper.dt_list entries must be numbers")
    if dt is None:
        dt = dt_list[0]

    run = raw.get("run")
    if not isinstance(run, dict):
        raise ConfigError("missing [run] section")
    t_end = _positive(
        float(_get(run, "t_end", (int, float), required=True, context=" in [run]")), "run.t_end"
    )
    checkpoint_interval = _get(run, "checkpoint_interval", int, default=0, context=" in [run]")
    if checkpoint_interval < 0:
        raise ConfigError(f"run.checkpoint_interval must be >= 0, got {checkpoint_interval}")
    space_threads = overrides.get(
        "space_threads", _get(run, "space_threads", int, default=1, context=" in [run]")
    )
    time_threads = overrides.get(
        "time_threads", _get(run, "time_threads", int, default=1, context=" in [run]")
    )
    _positive(space_threads, "run.space_threads")
    _positive(time_threads, "run.time_threads")
    core_budget = _get(
        run, "core_budget", int, default=physical_core_count(), context=" in [run]"
    )
    _positive(core_budget, "run.core_budget")
    reps = overrides.get("reps", _get(run, "reps", int, default=3, context=" in [run]"))
    _positive(reps, "run.reps")

    metric = overrides.get("metric", None)
    if metric is None:
        metric_table = raw.get("metric", {})
        if not isinstance(metric_table, dict):
            raise ConfigError("[metric] must be a table")
        metric = _get(metric_table, "kind", str, default="rel", context=" in [metric]")
    if metric not in ("rel", "abs"):
        raise ConfigError(f"metric must be 'rel' or 'abs', got {metric!r}")

    reference = raw.get("reference", {})
    if not isinstance(reference, dict):
        raise ConfigError("[reference] must be a table")
    reference_scheme = _get(reference, "scheme", str, default="imex-o2", context=" in [reference]")
    if reference_scheme not in SCHEMES:
        raise ConfigError(f"unknown reference scheme {reference_scheme!r}")
    reference_dt = reference.get("dt")
    if reference_dt is not None:
        reference_dt = _positive(
            float(_get(reference, "dt", (int, float), context=" in [reference]")), "reference.dt"
        )

    wp = raw.get("workprecision", {})
    if not isinstance(wp, dict):
        raise ConfigError("[workprecision] must be a table")
    wp_schemes = wp.get("schemes", [scheme])
    if not isinstance(wp_schemes, list) or not all(isinstance(s, str) for s in wp_schemes):
        raise ConfigError("workprecision.schemes must be a list of scheme names")
    for name in wp_schemes:
        if name not in SCHEMES:
            raise ConfigError(f"unknown scheme {name!r} in workprecision.schemes")

    scaling = raw.get("scaling", {})
    if not isinstance(scaling, dict):
        raise ConfigError("[scaling] must be a table")
    splits_raw = scaling.get("splits", [[1, 1], [1, time_threads]] if time_threads > 1 else [[1, 1]])
    splits = []
    for i, pair in enumerate(splits_raw):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in pair)
        ):
            raise ConfigError(
                f"scaling.splits[{i}] must be a [space_threads, time_threads] pair of positive "
                f"integers, got {pair!r}"
            )
        splits.append((pair[0], pair[1]))

    speedup = raw.get("speedup", {})
    if not isinstance(speedup, dict):
        raise ConfigError("[speedup] must be a table")
    candidates = []
    for i, table in enumerate(speedup.get("candidate", [])):
        if not isinstance(table, dict):
            raise ConfigError(f"speedup.candidate[{i}] must be a table")
        cand_scheme = _get(table, "scheme", str, required=True, context=f" in speedup.candidate[{i}]")
        if cand_scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {cand_scheme!r} in speedup.candidate[{i}]")
        cand_dt = _positive(
            float(
                _get(
                    table, "dt", (int, float), required=True, context=f" in speedup.candidate[{i}]"
                )
            ),
            f"speedup.candidate[{i}].dt",
        )
        cand_time_threads = _get(
            table, "time_threads", int, default=1, context=f" in speedup.candidate[{i}]"
        )
        _positive(cand_time_threads, f"speedup.candidate[{i}].time_threads")
        candidates.append({"scheme": cand_scheme, "dt": cand_dt, "time_threads": cand_time_threads})

    config = ExperimentConfig(
        title=_get(raw, "title", str, default=""),
        problem_kind=kind,
        problem_params=problem_params,
        jet_params=jet_params,
        scheme=scheme,
        n_nodes=n_nodes,
        n_sweeps=n_sweeps,
        preconditioner=_PRECONDITIONERS[preconditioner_name],
        dt=dt,
        dt_list=dt_list or [dt],
        t_end=t_end,
        checkpoint_interval=checkpoint_interval,
        space_threads=space_threads,
        time_threads=time_threads,
        core_budget=core_budget,
        reps=reps,
        metric=metric,
        reference_scheme=reference_scheme,
        reference_dt=reference_dt,
        wp_schemes=wp_schemes,
        scaling_splits=splits,
        speedup_candidates=candidates,
        raw=raw,
    )
    if not config.thread_budget_check():
        raise ConfigError(
            f"space_threads * time_threads = {space_threads * time_threads} exceeds the core "
            f"budget {core_budget}"
        )
    for step_size in config.dt_list:
        config.n_steps(step_size)
    if math.isfinite(t_end) is False:
        raise ConfigError(f"run.t_end must be finite, got {t_end}")
    return config
