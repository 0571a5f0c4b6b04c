"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside the supported range or inconsistent with others."""


class ValidationError(ValueError):
    """Input data violates a structural requirement (means, shapes, checkpoint times)."""


class ConfigError(ValueError):
    """A benchmark configuration file or thread setup is invalid."""


class NumericalError(ArithmeticError):
    """A state vector contains non-finite entries.

    Attributes
    ----------
    component : int
        Flat index of the first offending entry.
    """

    def __init__(self, message, component):
        super().__init__(message)
        self.component = component


class DivergenceError(RuntimeError):
    """Time integration produced a non-finite state.

    Attributes
    ----------
    step_index : int
        One-based index of the step that diverged.
    """

    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index


class SolveError(RuntimeError):
    """An implicit node solve failed.

    Attributes
    ----------
    node : int
        One-based collocation node index.
    sweep : int
        One-based sweep index.
    """

    def __init__(self, message, node, sweep):
        super().__init__(message)
        self.node = node
        self.sweep = sweep
