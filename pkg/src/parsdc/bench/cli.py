"""Command-line entry point for the benchmark harness.

Subcommands: ``run``, ``work-precision``, ``scaling``, ``speedup``,
``perf-model``.  Every subcommand takes ``--config`` (TOML, see
:mod:`parsdc.bench.config`) and ``--out``; ``--space-threads``,
``--time-threads``, ``--reps`` and ``--metric`` override the file.  Exit
codes: 0 success, 2 configuration error, 3 divergence.
"""

import argparse
import sys

from ..errors import ConfigError, DivergenceError, ParameterError
from .config import load_config
from .harness import perf_model_report, run_single, speedup_report, strong_scaling, work_precision

__all__ = ["main"]

_COMMANDS = {
    "run": run_single,
    "work-precision": work_precision,
    "scaling": strong_scaling,
    "speedup": speedup_report,
    "perf-model": perf_model_report,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="parsdc",
        description="Benchmark harness for serial and node-parallel deferred-correction integrators.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "single integration with a JSON run report"),
        ("work-precision", "error versus wall time across step sizes (CSV)"),
        ("scaling", "wall time across thread splits (CSV)"),
        ("speedup", "wall-time ratios against a base scheme (JSON + CSV)"),
        ("perf-model", "fit the cost model from step timings (JSON)"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="TOML experiment configuration")
        sub.add_argument("--out", default="bench-out", help="output directory (default: bench-out)")
        sub.add_argument("--space-threads", type=int, default=None, help="override run.space_threads")
        sub.add_argument("--time-threads", type=int, default=None, help="override run.time_threads")
        sub.add_argument("--reps", type=int, default=None, help="override run.reps")
        sub.add_argument(
            "--metric", choices=("rel", "abs"), default=None, help="override the error metric"
        )
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    overrides = {
        key: value
        for key, value in (
            ("space_threads", args.space_threads),
            ("time_threads", args.time_threads),
            ("reps", args.reps),
            ("metric", args.metric),
        )
        if value is not None
    }
    try:
        config = load_config(args.config, overrides=overrides)
        _COMMANDS[args.command](config, args.out)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc} (step {exc.step_index})", file=sys.stderr)
        return 3
    print(f"{args.command} complete; outputs in {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
