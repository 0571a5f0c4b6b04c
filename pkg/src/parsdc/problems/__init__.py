"""Split test problems: Dahlquist and planar rotating shallow water."""

from .dahlquist import DahlquistProblem
from .swe import (
    SNAPSHOT_MAGIC,
    JetConfig,
    PlanarShallowWater,
    jet_initial_condition,
    read_snapshot,
    write_snapshot,
)

__all__ = [
    "DahlquistProblem",
    "JetConfig",
    "PlanarShallowWater",
    "SNAPSHOT_MAGIC",
    "jet_initial_condition",
    "read_snapshot",
    "write_snapshot",
]
