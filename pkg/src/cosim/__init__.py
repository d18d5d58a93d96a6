"""Physics/network co-simulation with windowed time synchronization."""

from .scenario import Scenario, load_preset, load_scenario
from .synchro import RunResult, Strategy, SyncPolicy, run_simulation
from .sweep import sweep

__all__ = [
    "RunResult",
    "Scenario",
    "Strategy",
    "SyncPolicy",
    "load_preset",
    "load_scenario",
    "run_simulation",
    "sweep",
]
