"""Split Dahlquist test equation u' = lambda_I u + lambda_E u."""

import numpy as np

from ..core import SplitProblem
from ..errors import ParameterError


class DahlquistProblem(SplitProblem):
    """Linear scalar test problem with an implicit/explicit split.

    The state holds ``width`` independent copies of the scalar so that
    per-step costs can be made large enough to time reliably.  The implicit
    solve is closed-form: ``u = beta / (1 - alpha * lambda_impl)``.

    Parameters
    ----------
    lambda_impl, lambda_expl : complex
        Stiff (implicitly treated) and nonstiff (explicitly treated) rates.
    width : int
        Number of independent copies, default 1.
    """

    def __init__(self, lambda_impl, lambda_expl, width=1):
        super().__init__()
        if not isinstance(width, (int, np.integer)) or width < 1:
            raise ParameterError(f"width must be a positive integer, got {width!r}")
        self.lambda_impl = complex(lambda_impl)
        self.lambda_expl = complex(lambda_expl)
        self.width = int(width)

    @property
    def n_dof(self):
        return self.width

    def initial_state(self, value=1.0):
        return np.full(self.width, value, dtype=complex)

    def exact(self, t, u0):
        return np.exp((self.lambda_impl + self.lambda_expl) * t) * u0

    def error_field(self, state):
        """Field entering the benchmark error norm: the state itself."""
        return state.copy()

    def _f_expl(self, state):
        return self.lambda_expl * state

    def _f_impl(self, state):
        return self.lambda_impl * state

    def _implicit_solve(self, alpha, beta, guess):
        return beta / (1.0 - alpha * self.lambda_impl)
