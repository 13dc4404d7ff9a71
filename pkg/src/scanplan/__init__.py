"""Uncertainty-aware coverage path planning for a robot-held optical scanner."""

from .config import Config
from .errors import (
    ConfigError,
    CoverageFailure,
    InfeasibleToleranceError,
    PlanningError,
    UnreachablePairError,
)
from .geometry import MeasurementPoint, TriangleMesh, load_mesh, load_mps, voxelize
from .pipeline import build_problem, evaluate, plan_from_config, run
from .uncertainty import SensorUncertaintyCurve, UncertaintyBudget, budget_from_tolerance

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ConfigError",
    "CoverageFailure",
    "InfeasibleToleranceError",
    "MeasurementPoint",
    "PlanningError",
    "SensorUncertaintyCurve",
    "TriangleMesh",
    "UncertaintyBudget",
    "UnreachablePairError",
    "budget_from_tolerance",
    "build_problem",
    "evaluate",
    "load_mesh",
    "load_mps",
    "plan_from_config",
    "run",
    "voxelize",
]
