"""Exception hierarchy.

Step indices in messages are 0-based (matching s_ij(k)); state indices are
1-based, as in every external artifact.
"""


class RevchainError(Exception):
    """Base class for all errors raised by this package."""


class ChainValidationError(RevchainError, ValueError):
    pass


class RowNotStochastic(ChainValidationError):
    def __init__(self, k, i, total):
        self.k, self.i, self.total = k, i, total
        super().__init__(f"row {i} of transition matrix {k} sums to {total!r}, not 1")


class NegativeEntry(ChainValidationError):
    def __init__(self, k, i, j, value):
        self.k, self.i, self.j, self.value = k, i, j, value
        super().__init__(f"transition matrix {k} has negative entry ({i},{j}) = {value!r}")


class InitialNotDistribution(ChainValidationError):
    pass


class DimensionMismatch(ChainValidationError):
    pass


class InsufficientSteps(ChainValidationError):
    def __init__(self, have, need):
        self.have, self.need = have, need
        super().__init__(f"{have} per-step transition matrices supplied, window needs {need}")


class StepOutOfRange(RevchainError, IndexError):
    pass


class WindowError(RevchainError, ValueError):
    pass


class ClusterOutOfRange(WindowError):
    pass


class EmptyCluster(WindowError):
    pass


class ImpossibleObservation(RevchainError):
    """The endpoint observation has probability zero (e == 0)."""


class TooLarge(RevchainError):
    def __init__(self, paths, guard):
        self.paths, self.guard = paths, guard
        super().__init__(f"enumeration needs {paths} paths, guard is {guard}")


class ShapeMismatch(RevchainError, ValueError):
    pass


class NoAcceptedSamples(RevchainError):
    pass


class UndefinedRowReached(RevchainError):
    pass


class ParseError(RevchainError, ValueError):
    pass


class ImpossibleObservationWarning(UserWarning):
    """Issued when output is produced for an observation of probability zero."""


class ValidationError(RevchainError, ValueError):
    """An input file parsed but failed validation; wraps the underlying error."""

    def __init__(self, source, cause):
        self.source, self.cause = source, cause
        super().__init__(f"{source}: {cause}")
