"""Exception types raised across the package."""


class CardyLabError(ValueError):
    pass


class EmptyFaceSet(CardyLabError):
    pass


class NotConnected(CardyLabError):
    pass


class NotSimplyConnected(CardyLabError):
    pass


class MeshTooCoarse(CardyLabError):
    pass


class MarksCollide(CardyLabError):
    pass


class InvalidMarks(CardyLabError):
    """Marks are not distinct boundary mid-edges in counterclockwise order."""


class SameMark(CardyLabError):
    pass


class BoundaryVertex(CardyLabError):
    pass


class WrongMarkCount(CardyLabError):
    pass


class BoundaryMismatch(CardyLabError):
    pass


class TooLarge(CardyLabError):
    pass


class DegenerateAnnulus(CardyLabError):
    pass


class InvalidBranchSet(CardyLabError):
    pass


class MarkAtVertex(CardyLabError):
    pass


class NotAContour(CardyLabError):
    pass


class MarkOnContour(CardyLabError):
    pass


class NonPositiveAspect(CardyLabError):
    pass


class NotDefined(CardyLabError):
    """The observable is not defined at a marked mid-edge."""
