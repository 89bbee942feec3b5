"""Exception types raised across the package."""


class TerrainError(ValueError):
    """Base class for all domain errors."""


# geometry
class FrameMismatch(TerrainError):
    pass


class BehindCamera(TerrainError):
    pass


class NoGroundIntersection(TerrainError):
    pass


class DegenerateMarker(TerrainError):
    pass


class InsufficientCoverage(TerrainError):
    def __init__(self, coverage, threshold):
        super().__init__(f"patch coverage {coverage:.3f} below {threshold:.3f}")
        self.coverage = coverage


# signals
class TooFewSamples(TerrainError):
    pass


class WindowOutOfRange(TerrainError):
    pass


class OutOfSupport(TerrainError):
    pass


# dataset
class DegenerateRange(TerrainError):
    pass


class TooFewRecords(TerrainError):
    pass


class NoViews(TerrainError):
    pass


# predictor
class BadPatchShape(TerrainError):
    pass


class SchemaMismatch(TerrainError):
    pass


class NonFiniteLoss(TerrainError):
    pass


# mapping / planner
class EmptyMap(TerrainError):
    pass


class NoPath(TerrainError):
    pass


class UnobservedEndpoint(TerrainError):
    pass


# simkit
class PathOutOfScene(TerrainError):
    pass
