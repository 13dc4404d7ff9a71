"""Exception hierarchy. Each error knows the CLI exit code it maps to."""


class PlanningError(Exception):
    exit_code = 1
    stage = "planning"


class ConfigError(PlanningError):
    exit_code = 2
    stage = "config"


class MeshError(PlanningError):
    exit_code = 2
    stage = "load"


class DegenerateGeometryError(MeshError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class VoxelizationError(PlanningError):
    exit_code = 2
    stage = "voxelize"


class EdgeTooLargeError(VoxelizationError):
    pass


class InfeasibleToleranceError(PlanningError):
    """The tolerance leaves no room for sensor uncertainty at all."""

    exit_code = 4
    stage = "budget"


class InfeasibleBudgetError(InfeasibleToleranceError):
    """A budget exists but the sensor cannot reach it at any angle."""


class OutOfValidityError(PlanningError):
    stage = "budget"


class CoverageFailure(PlanningError):
    exit_code = 3
    stage = "coverage"

    def __init__(self, message, uncovered=(), graph=None):
        super().__init__(message)
        self.uncovered = tuple(uncovered)
        self.graph = graph


class UncoverableVoxelError(CoverageFailure):
    stage = "candidates"


class IncompleteCoverageError(CoverageFailure):
    stage = "candidates"


class InvalidGraphError(PlanningError):
    stage = "sample"


class DegenerateCostError(PlanningError):
    stage = "sample"


class UnreachablePairError(PlanningError):
    exit_code = 5
    stage = "sequence"
