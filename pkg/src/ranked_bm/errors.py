"""Exception hierarchy for ranked_bm."""


class RankedBMError(Exception):
    """Base class for all domain errors raised by this package."""


class UnsupportedTailError(RankedBMError):
    """A tail rule outside the closed family where a question is decidable."""


class NotRankableError(RankedBMError):
    pass


class NegativeGapError(RankedBMError):
    pass


class NotSymmetricError(RankedBMError):
    pass


class NotTightError(RankedBMError):
    pass


class NotSkewSymmetricError(RankedBMError):
    pass


class SingularError(RankedBMError):
    pass


class LadderNotMonotoneError(RankedBMError):
    pass


class NoCesaroLimitError(RankedBMError):
    pass


class NoConvergenceError(RankedBMError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class InsufficientSamplesError(RankedBMError):
    pass


class HypothesisViolatedError(RankedBMError):
    pass


class MismatchedShapesError(RankedBMError):
    pass


class ConfigError(RankedBMError):
    """Malformed or inconsistent experiment configuration."""
