"""Exception and warning classes raised across the package."""


class CataError(Exception):
    """Base class for every error raised by catamva."""


# ingest
class MissingColumn(CataError, LookupError):
    pass


class DuplicateCell(CataError, ValueError):
    pass


class NonBinaryValue(CataError, ValueError):
    pass


class UnknownLevel(CataError, LookupError):
    pass


class ConflictingRules(CataError, ValueError):
    pass


class AllColumnsRemoved(CataError, ValueError):
    pass


class EmptyBrick(CataError, ValueError):
    pass


class NonBinaryBrick(CataError, ValueError):
    pass


class UnknownGroupKey(CataError, LookupError):
    pass


class InconsistentGroup(CataError, ValueError):
    pass


# decomposition / factor models
class NonPositiveWeight(CataError, ValueError):
    pass


class NonFiniteInput(CataError, ValueError):
    pass


class DegenerateTable(CataError, ValueError):
    pass


class ZeroProfile(CataError, ValueError):
    pass


class DimensionMismatch(CataError, ValueError):
    pass


class EmptyModel(CataError, ValueError):
    pass


class AsymmetricInput(CataError, ValueError):
    pass


class NegativeDistance(CataError, ValueError):
    pass


class InvalidK(CataError, ValueError):
    pass


class DegenerateBlock(CataError, ValueError):
    pass


class RowRegistryMismatch(CataError, ValueError):
    pass


class FewerThanTwoBlocks(CataError, ValueError):
    pass


# inference
class EmptyGroup(CataError, ValueError):
    pass


class SpaceMismatch(CataError, ValueError):
    pass


class GroupTooSmall(CataError, ValueError):
    pass


# pipeline / rendering
class ConfigInvalid(CataError, ValueError):
    pass


class DimensionOutOfRange(CataError, IndexError):
    pass


class PipelineError(CataError):
    """A module error annotated with the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class RankZeroWarning(UserWarning):
    """The analysed table carries no structure (independence)."""


class PointAtOriginWarning(UserWarning):
    pass


class ConstantColumnWarning(UserWarning):
    pass


class DegenerateEllipseWarning(UserWarning):
    pass
