"""Exception types raised across histweak."""


class HistweakError(Exception):
    """Base class for every error the library raises on purpose."""


class ValidationError(HistweakError, ValueError):
    """An input failed a structural check; ``deviation`` holds the worst offending magnitude."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class NotHermitian(ValidationError):
    pass


class NotIdempotent(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class InvalidFamily(ValidationError):
    pass


class Incomplete(InvalidFamily):
    pass


class NotOrthogonal(InvalidFamily):
    pass


class IncompleteAndNotOrthogonal(Incomplete, NotOrthogonal):
    pass


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class SizeOverflow(HistweakError):
    pass


class ZeroDenominator(HistweakError, ZeroDivisionError):
    """Post-selection amplitude too small; ``result`` holds the unconditioned numbers."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonIncreasingTimes(ValidationError):
    pass


class ProbabilityOutOfRange(ValidationError):
    pass


class GridTooCoarse(ValidationError):
    pass


class PostSelectionImpossible(HistweakError):
    pass


class InconsistentDimensions(ValidationError):
    pass


class ParseError(HistweakError, ValueError):
    """Network file problem at a 1-based ``line`` and ``column``."""

    def __init__(self, message, line=0, column=0, source="<network>"):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{source}:{line}:{column}: {message}")


class NetworkSyntaxError(ParseError):
    pass


class UnknownNode(ParseError):
    pass


class NonAdjacentSlice(ParseError):
    pass


class DuplicateEdge(ParseError):
    pass
