"""Analytic cost and speedup model for diagonal sweeps, plus a timing fit.

The model prices one diagonal step from three stage costs: an explicit
tendency evaluation ``c_e``, an implicit node solve ``c_s``, and optional
extra explicit work per node update ``c_tilde_e`` (zero for the problems in
this package).  Initialization costs one evaluation, each of the K - 1 full
sweeps costs every node an evaluation, a solve and the extra work, and the
closing last-node solve costs one solve:

    C_seq = c_e + (K - 1) M (c_e + c_s + c_tilde_e) + c_s
    C_par = c_e + (K - 1)   (c_e + c_s + c_tilde_e) + c_s

C_par assumes the M node updates of a sweep run perfectly parallel, so for
K = M the ratio C_seq / C_par collapses to

    S(M, r) = (1 + M (M - 1)(1 + r)) / (1 + (M - 1)(1 + r)),   r = c_tilde_e / (c_e + c_s)

which increases with r and is bounded by M.  Memory and communication costs
are outside the model.

``fit_costs`` recovers (c_e, c_s) from measured ``StepReport`` stage timings
of sequential diagonal steps by least squares; implicit tendency evaluations
ride along with the stages that trigger them.  ``c_tilde_e`` multiplies the
same rows as ``c_e`` in every stage, so it is not identifiable from the stage
structure and is pinned by the caller instead.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ValidationError

__all__ = ["PerfModel", "fit_costs", "perf_report", "step_costs", "theoretical_speedup"]


@dataclass(frozen=True)
class PerfModel:
    """Stage costs of a diagonal step with ``n_nodes`` nodes and ``n_sweeps`` sweeps."""

    n_nodes: int
    n_sweeps: int
    c_e: float
    c_s: float
    c_tilde_e: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n_nodes, int) or self.n_nodes < 1:
            raise ParameterError(f"node count must be a positive integer, got {self.n_nodes!r}")
        if not isinstance(self.n_sweeps, int) or self.n_sweeps < 1:
            raise ParameterError(f"sweep count must be a positive integer, got {self.n_sweeps!r}")
        for name in ("c_e", "c_s", "c_tilde_e"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be nonnegative, got {getattr(self, name)}")


def step_costs(model):
    """Modeled sequential and perfectly parallel cost of one diagonal step."""
    node_update = model.c_e + model.c_s + model.c_tilde_e
    c_seq = model.c_e + (model.n_sweeps - 1) * model.n_nodes * node_update + model.c_s
    c_par = model.c_e + (model.n_sweeps - 1) * node_update + model.c_s
    return c_seq, c_par


def theoretical_speedup(n_nodes, ratio):
    """Parallel-over-sequential speedup for ``n_sweeps = n_nodes``.

    ``ratio`` is the extra explicit work per node update relative to the cost
    of one evaluation plus one solve.
    """
    if not isinstance(n_nodes, int) or n_nodes < 1:
        raise ParameterError(f"node count must be a positive integer, got {n_nodes!r}")
    if ratio < 0.0:
        raise ParameterError(f"cost ratio must be nonnegative, got {ratio}")
    return (1.0 + n_nodes * (n_nodes - 1) * (1.0 + ratio)) / (1.0 + (n_nodes - 1) * (1.0 + ratio))


def fit_costs(reports, n_nodes, c_tilde_e=0.0):
    """Least-squares stage costs from sequential diagonal-step reports.

    Each report contributes its initialization time (one evaluation), its
    full-sweep times (``n_nodes`` evaluations plus solves plus pinned extra
    work each) and its final-node time (one solve).  Needs at least three
    reports with a consistent sweep count.
    """
    reports = list(reports)
    if len(reports) < 3:
        raise ParameterError(f"need at least 3 step reports to fit costs, got {len(reports)}")
    if c_tilde_e < 0.0:
        raise ParameterError(f"c_tilde_e must be nonnegative, got {c_tilde_e}")
    sweep_counts = {len(report.sweep_s) for report in reports}
    if len(sweep_counts) != 1:
        raise ValidationError(f"inconsistent sweep counts across reports: {sorted(sweep_counts)}")
    n_sweeps = sweep_counts.pop() + 1
    rows = []
    observed = []
    for report in reports:
        rows.append((1.0, 0.0))
        observed.append(report.init_s)
        for sweep_time in report.sweep_s:
            rows.append((float(n_nodes), float(n_nodes)))
            observed.append(sweep_time - n_nodes * c_tilde_e)
        rows.append((0.0, 1.0))
        observed.append(report.final_node_s)
    solution = np.linalg.lstsq(np.array(rows), np.array(observed), rcond=None)[0]
    c_e, c_s = (float(v) for v in solution)
    if c_e <= 0.0 or c_s <= 0.0:
        raise ValidationError(
            f"degenerate timing samples: fitted c_e = {c_e:.3e}, c_s = {c_s:.3e}"
        )
    return PerfModel(n_nodes=n_nodes, n_sweeps=n_sweeps, c_e=c_e, c_s=c_s, c_tilde_e=c_tilde_e)


def perf_report(model, s_measured=None):
    """JSON-ready summary of a model and an optional measured speedup."""
    c_seq, c_par = step_costs(model)
    return {
        "M": model.n_nodes,
        "K": model.n_sweeps,
        "c_E": model.c_e,
        "c_S": model.c_s,
        "c_tilde_E": model.c_tilde_e,
        "C_seq": c_seq,
        "C_par": c_par,
        "S_theory": theoretical_speedup(model.n_nodes, model.c_tilde_e / (model.c_e + model.c_s)),
        "S_measured": s_measured,
    }
