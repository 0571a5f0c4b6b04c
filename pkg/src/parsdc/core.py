"""State-vector conventions, split-problem contract, and per-step sweep storage.

State vectors are flat contiguous numpy arrays (float64 or complex128); the
problem defines the layout.  Complex entries are treated as interleaved real
pairs, so the Euclidean norm of a complex state equals the norm of its
underlying reals.  Integrators only ever combine states linearly, take norms,
and hand them to the owning problem, which keeps every integrator agnostic of
the problem's layout.

``SweepState`` holds the per-step storage of a deferred-correction sweep: the
step-start triple ``(u0, fe0, fi0)`` plus one solution slot and two tendency
slots per collocation node.  Slots are rebound to freshly computed arrays and
never mutated in place, so aliased arrays (all slots start out pointing at the
step-start data) are safe, and the number of distinct live arrays is an exact
measure of retained node-level storage.  Between sweeps only the two tendency
stores are populated, 2 M node-level vectors in total; sweep code drops node
solutions once their tendencies are evaluated.
"""

import threading

import numpy as np

from .errors import NumericalError

__all__ = [
    "SplitProblem",
    "SweepState",
    "WorkCounters",
    "check_finite",
    "evaluation_counters",
    "initialize_sweep",
    "state_norm",
]


def state_norm(state):
    """Euclidean norm over the underlying real components."""
    return float(np.linalg.norm(state))


def check_finite(state):
    """Raise :class:`NumericalError` naming the first non-finite component."""
    finite = np.isfinite(state)
    if not finite.all():
        component = int(np.argmin(finite))
        raise NumericalError(
            f"non-finite value {state.flat[component]!r} at component {component}",
            component=component,
        )


class WorkCounters:
    """Thread-safe tally of tendency evaluations and implicit solves."""

    def __init__(self):
        self._lock = threading.Lock()
        self.n_f_expl = 0
        self.n_f_impl = 0
        self.n_solve = 0

    def tally_f_expl(self):
        with self._lock:
            self.n_f_expl += 1

    def tally_f_impl(self):
        with self._lock:
            self.n_f_impl += 1

    def tally_solve(self):
        with self._lock:
            self.n_solve += 1

    def reset(self):
        with self._lock:
            self.n_f_expl = 0
            self.n_f_impl = 0
            self.n_solve = 0

    def snapshot(self):
        with self._lock:
            return (self.n_f_expl, self.n_f_impl, self.n_solve)


class SplitProblem:
    """Contract for an implicit/explicit split right-hand side.

    Subclasses implement ``_f_expl``, ``_f_impl`` and ``_implicit_solve``; the
    public wrappers keep the evaluation counters exact.  ``implicit_solve``
    must return ``u`` with ``u - alpha * f_impl(u) = beta`` to a relative
    residual of 1e-12, and must reduce to the identity for ``alpha = 0``.
    The ``guess`` argument is ignored by direct solvers; iterative problems
    may use it as a warm start.

    All evaluations allocate fresh output arrays, so concurrent calls from
    several threads are safe as long as inputs are not mutated.
    """

    def __init__(self):
        self.counters = WorkCounters()

    def f_expl(self, state):
        self.counters.tally_f_expl()
        return self._f_expl(state)

    def f_impl(self, state):
        self.counters.tally_f_impl()
        return self._f_impl(state)

    def implicit_solve(self, alpha, beta, guess=None):
        if alpha == 0.0:
            return beta.copy()
        self.counters.tally_solve()
        return self._implicit_solve(alpha, beta, guess)

    def reset_counters(self):
        self.counters.reset()

    def _f_expl(self, state):
        raise NotImplementedError

    def _f_impl(self, state):
        raise NotImplementedError

    def _implicit_solve(self, alpha, beta, guess):
        raise NotImplementedError


def evaluation_counters(problem):
    """Return the cumulative ``(n_f_expl, n_f_impl, n_solve)`` of a problem."""
    return problem.counters.snapshot()


class SweepState:
    """Per-step storage of a deferred-correction sweep.

    Attributes
    ----------
    u0, fe0, fi0 : numpy.ndarray
        Step-start solution and its tendencies (read-only by convention).
    u, fe, fi : list
        Node slots (one-based node m lives at index m - 1).  Rebound, never
        mutated; a slot may hold ``None`` once its content is no longer
        needed.
    """

    def __init__(self, u0, fe0, fi0, n_nodes):
        self.u0 = u0
        self.fe0 = fe0
        self.fi0 = fi0
        self.u = [u0] * n_nodes
        self.fe = [fe0] * n_nodes
        self.fi = [fi0] * n_nodes

    @property
    def n_nodes(self):
        return len(self.u)

    def distinct_node_arrays(self):
        """Number of distinct live arrays retained by this state."""
        refs = [self.u0, self.fe0, self.fi0, *self.u, *self.fe, *self.fi]
        return len({id(a) for a in refs if a is not None})


def initialize_sweep(problem, u_n, n_nodes):
    """Copy-initialize all node slots from the step-start state.

    Evaluates each tendency exactly once; every node slot starts out aliased
    to the step-start triple, so initialization retains O(1) storage.
    """
    u0 = np.array(u_n, copy=True)
    fe0 = problem.f_expl(u0)
    fi0 = problem.f_impl(u0)
    return SweepState(u0=u0, fe0=fe0, fi0=fi0, n_nodes=n_nodes)
