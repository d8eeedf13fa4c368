"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 config, 3 solver, 4 geometry, 5 io.
"""

from __future__ import annotations


class OtgeoError(Exception):
    exit_code = 1


class ConfigInvalid(OtgeoError):
    exit_code = 2


class IoError(OtgeoError):
    exit_code = 5


# -- geometry ---------------------------------------------------------------

class GeometryError(OtgeoError):
    exit_code = 4


class DomainError(GeometryError):
    pass


class DegenerateCost(GeometryError):
    """The mixed Hessian of the cost is (numerically) singular."""


class StencilOutOfDomain(GeometryError):
    pass


class SingularMetric(GeometryError):
    pass


class NotOrthogonal(GeometryError):
    pass


class NotSpacelike(GeometryError):
    pass


class FrameDegeneracy(GeometryError):
    pass


class MeanCurvatureTooLarge(GeometryError):
    pass


class WrongCostKind(GeometryError):
    pass


class NonpositiveDensity(GeometryError):
    pass


class SupportEscapesRegion(GeometryError):
    pass


class EmptySupport(GeometryError):
    pass


# -- solver -----------------------------------------------------------------

class SolverError(OtgeoError):
    exit_code = 3


class InfeasibleMarginals(SolverError):
    pass


class SolverStall(SolverError):
    pass


class NumericalOverflow(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class NonInjectiveMap(SolverError):
    pass


class StageFailure(OtgeoError):
    """Wraps an error raised inside a pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
