"""Serial and thread-parallel IMEX spectral deferred corrections.

The package provides Radau-right collocation tables, serial and diagonal
(node-parallel) IMEX SDC sweeps, second-order IMEX and semi-implicit
Adams-Bashforth reference integrators, a split Dahlquist test problem, a
pseudo-spectral planar rotating shallow-water solver, a cost/speedup model for
the diagonal sweeps, and a benchmark command line.
"""

from .collocation import (
    MAX_NODES,
    CollocationTable,
    DiagonalPreconditioner,
    diagonal_coefficients,
    node_spacings,
    quadrature_matrix,
    radau_right_nodes,
)
from .core import SplitProblem, SweepState, evaluation_counters, initialize_sweep, state_norm
from .errors import (
    ConfigError,
    DivergenceError,
    NumericalError,
    ParameterError,
    SolveError,
    ValidationError,
)
from .integrators import (
    Ab2SiStepper,
    DiagonalSdcStepper,
    ExplicitSpacing,
    ImexO2Stepper,
    SdcConfig,
    SerialSdcStepper,
    StepReport,
    SweepMode,
    Trajectory,
    ab2_si_step,
    dsdc_step,
    imex_o2_step,
    integrate,
    sdc_step_serial,
)
from .problems import (
    DahlquistProblem,
    JetConfig,
    PlanarShallowWater,
    jet_initial_condition,
    read_snapshot,
    write_snapshot,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_NODES",
    "CollocationTable",
    "DiagonalPreconditioner",
    "diagonal_coefficients",
    "node_spacings",
    "quadrature_matrix",
    "radau_right_nodes",
    "SplitProblem",
    "SweepState",
    "evaluation_counters",
    "initialize_sweep",
    "state_norm",
    "ConfigError",
    "DivergenceError",
    "NumericalError",
    "ParameterError",
    "SolveError",
    "ValidationError",
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
    "dsdc_step",
    "imex_o2_step",
    "integrate",
    "sdc_step_serial",
    "DahlquistProblem",
    "JetConfig",
    "PlanarShallowWater",
    "jet_initial_condition",
    "read_snapshot",
    "write_snapshot",
    "__version__",
]
