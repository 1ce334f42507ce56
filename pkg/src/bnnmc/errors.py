"""Exception hierarchy shared by all modules."""


class BnnMcError(Exception):
    """Base class for all library errors."""


# priors ---------------------------------------------------------------


class PriorError(BnnMcError, ValueError):
    """Invalid prior specification. ``path`` locates the offending node."""

    def __init__(self, message, path="prior"):
        self.path = path
        super().__init__(f"{path}: {message}")


class NonPositiveScale(PriorError):
    pass


class NonPSDCovariance(PriorError):
    pass


class EmptyMixture(PriorError):
    pass


class NegativeWeight(PriorError):
    pass


class CyclicHierarchy(PriorError):
    pass


class DomainError(PriorError):
    pass


class InvalidHyperprior(PriorError):
    pass


class MissingHyperparameters(PriorError):
    pass


class DimensionMismatch(BnnMcError, ValueError):
    pass


# model / sampler ------------------------------------------------------


class NonFiniteGradient(BnnMcError, FloatingPointError):
    pass


class DivergenceDetected(BnnMcError, FloatingPointError):
    """Raised when a chain produces a non-finite state or energy."""

    def __init__(self, step, record=None, reason="non-finite state"):
        self.step = step
        self.record = record
        super().__init__(f"divergence at step {step}: {reason}")


class RequiresFullBatch(BnnMcError, ValueError):
    pass


class EmptyArchive(BnnMcError, ValueError):
    pass


class ArchiveFormatError(BnnMcError, ValueError):
    """Archive on disk violates a layout invariant."""


# diagnostics / metrics / data -----------------------------------------


class EmptyChain(BnnMcError, ValueError):
    pass


class EmptyInput(BnnMcError, ValueError):
    pass


class DuplicateTemperature(BnnMcError, ValueError):
    pass


class MissingFile(BnnMcError, FileNotFoundError):
    pass


class ParseError(BnnMcError, ValueError):
    def __init__(self, row, col, message):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col!r}: {message}")


class UnknownColumn(BnnMcError, KeyError):
    def __str__(self):
        return f"unknown column {self.args[0]!r}"


class DegenerateSplit(BnnMcError, ValueError):
    pass
