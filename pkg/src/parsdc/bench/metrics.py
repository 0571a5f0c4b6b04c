"""Error metrics between checkpointed trajectories."""

import numpy as np

from ..errors import ValidationError

__all__ = ["error_linf_l2", "observed_order"]


def error_linf_l2(trajectory, reference, problem, relative=True):
    """Max-over-checkpoints L2 distance between comparison fields.

    The comparison field is ``problem.error_field`` (physical vorticity for
    the shallow-water problem, the state itself for Dahlquist).  With
    ``relative=True`` the result is normalized by the largest reference field
    norm over the matching checkpoints.  The initial checkpoint is excluded:
    both trajectories start from the same state and a zero distance there
    carries no information.
    """
    if len(trajectory.times) != len(reference.times):
        raise ValidationError(
            f"checkpoint count mismatch: {len(trajectory.times)} vs {len(reference.times)}"
        )
    worst = 0.0
    scale = 0.0
    for index, (t_a, t_b) in enumerate(zip(trajectory.times, reference.times)):
        if abs(t_a - t_b) > 1e-9 * max(1.0, abs(t_b)):
            raise ValidationError(f"checkpoint times differ at index {index}: {t_a} vs {t_b}")
        if index == 0:
            continue
        field_a = np.asarray(problem.error_field(trajectory.states[index]))
        field_b = np.asarray(problem.error_field(reference.states[index]))
        worst = max(worst, float(np.linalg.norm(field_a - field_b)))
        scale = max(scale, float(np.linalg.norm(field_b)))
    if not relative:
        return worst
    if scale == 0.0:
        raise ValidationError("reference comparison field is identically zero; relative metric undefined")
    return worst / scale


def observed_order(dts, errors):
    """Least-squares slope of log(error) against log(dt)."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size != errors.size or dts.size < 2:
        raise ValidationError("need at least two matching (dt, error) pairs")
    if np.any(dts <= 0.0) or np.any(errors <= 0.0):
        raise ValidationError("step sizes and errors must be positive for a log-log fit")
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
