"""Exception types shared across the package."""


class SPSCError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SPSCError):
    """Malformed input file (ragged rows, non-numeric cells, bad labels)."""


class EmptyInput(SPSCError):
    """An operation received no data to work on."""


class DegenerateSample(SPSCError):
    """A sample column is identically zero and cannot be normalized."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"zero-norm column(s) at index {self.columns}")


class InsufficientSamples(SPSCError):
    """Not enough samples for the requested neighborhood size."""


class DegenerateVertex(SPSCError):
    """A hypergraph vertex has zero degree."""


class InvalidPace(SPSCError):
    """Pace parameter out of range (lambda <= 0 or mu <= 1)."""


class ShapeError(SPSCError):
    """Inconsistent matrix dimensions."""


class NumericalError(SPSCError):
    """A solver produced or encountered non-finite / non-convex quantities."""


class InvalidConfig(SPSCError):
    """A configuration value violates its contract."""


class MissingArtifact(SPSCError):
    """A required file from a previous run is absent."""


class NonFiniteObjective(SPSCError):
    """The outer loop hit a non-finite objective; carries the partial trace."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)
