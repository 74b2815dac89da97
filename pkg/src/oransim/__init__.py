"""TTI-driven disaggregated-RAN simulator with nested actor-critic agents."""

from .config import SimConfig
from .engine import Simulation, run_batch

__version__ = "0.1.0"

__all__ = ["SimConfig", "Simulation", "run_batch", "__version__"]
