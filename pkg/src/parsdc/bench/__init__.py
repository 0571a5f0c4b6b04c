"""Benchmark harness: configs, metrics, experiment drivers, and the CLI."""

from .config import ExperimentConfig, SCHEMES, load_config, physical_core_count
from .harness import (
    build_initial_state,
    build_problem,
    build_stepper,
    environment_info,
    perf_model_report,
    run_single,
    speedup_report,
    strong_scaling,
    work_precision,
)
from .metrics import error_linf_l2, observed_order

__all__ = [
    "ExperimentConfig",
    "SCHEMES",
    "load_config",
    "physical_core_count",
    "build_initial_state",
    "build_problem",
    "build_stepper",
    "environment_info",
    "perf_model_report",
    "run_single",
    "speedup_report",
    "strong_scaling",
    "work_precision",
    "error_linf_l2",
    "observed_order",
]
