"""Exception hierarchy for the stair localization pipeline.

Frame-rejection errors (InsufficientConsensus, NoValidDepth, AllRejected, ...)
are caught per bounding box by the localizer and surfaced as diagnostics;
everything else propagates.
"""


class StairlocError(Exception):
    """Base class for all pipeline errors."""


class NonPositiveDepth(StairlocError):
    """Projection or unprojection requested with depth <= 0."""


class OutOfBounds(StairlocError):
    """Pixel indexes outside the image rectangle."""


class DegenerateSegment(StairlocError):
    """Line segment endpoints coincide (sub-pixel span)."""


class EmptyInput(StairlocError):
    """Operation requires a non-empty collection."""


class InsufficientConsensus(StairlocError):
    """No slope model reached the required inlier fraction (Hypothesis of
    majority parallel nosing lines violated; frame rejected)."""


class EmptyCrop(StairlocError):
    """Bounding box clamps to a zero-area rectangle."""


class OutOfImage(StairlocError):
    """Segment endpoint leaves the image rectangle by more than 1 px."""


class SchemaError(StairlocError):
    """Detection document is structurally malformed."""

    def __init__(self, message, line=None, field=None):
        detail = message
        if line is not None:
            detail = f"line {line}: {detail}"
        if field is not None:
            detail = f"{detail} (field {field!r})"
        super().__init__(detail)
        self.line = line
        self.field = field


class InvariantError(StairlocError):
    """Detection document parses but violates a declared invariant."""


class NoValidDepth(StairlocError):
    """Every segment lost too many depth samples; frame rejected."""


class EmptyCloud(StairlocError):
    """Position estimation over an empty point cloud."""


class TooFewPoints(StairlocError):
    """Ground-line fit needs at least two points."""


class DegenerateCluster(StairlocError):
    """Ground-line fit over coincident points."""


class AllRejected(StairlocError):
    """Every ground line failed the residual gate or angular consensus."""


class NotVisible(StairlocError):
    """No staircase nosing projects inside the image."""


class SpecError(StairlocError):
    """Malformed scene or run configuration."""


class JoinError(StairlocError):
    """Evaluation join produced no matching frames."""
