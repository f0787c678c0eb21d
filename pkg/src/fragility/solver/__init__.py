from .bnb import BoundsResult, SolverOptions, solve  # noqa: F401
from .sweep import SweepResult, sweep  # noqa: F401

__all__ = ["BoundsResult", "SolverOptions", "solve", "SweepResult", "sweep"]
