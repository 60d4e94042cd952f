"""Exception hierarchy shared across the splicefuse package."""


class SpliceFuseError(Exception):
    """Base class for all splicefuse-specific errors."""


class CorpusLayoutError(SpliceFuseError):
    """The dataset root does not have the required authentic/ + spliced/ layout."""


class SplitError(SpliceFuseError):
    """A train/test split cannot be produced under the protocol constraints."""


class ShapeError(SpliceFuseError):
    """An array argument has incompatible dimensions for the requested operation."""


class EmptyPairError(SpliceFuseError):
    """A co-occurrence offset leaves no valid pixel pairs inside the matrix."""


class BoostingFailureError(SpliceFuseError):
    """A boosting round produced a weak learner no better than chance."""

    def __init__(self, message, round_index=None):
        super().__init__(message)
        self.round_index = round_index


class FeatureExhaustionError(SpliceFuseError):
    """No selectable feature remains for the stump search."""


class TrainingError(SpliceFuseError):
    """Model training cannot proceed (degenerate inputs, unsolvable system)."""


class ConvergenceError(TrainingError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, worst_violation=None):
        super().__init__(message)
        self.worst_violation = worst_violation


class CalibrationError(SpliceFuseError):
    """Probability calibration cannot be fit on the given decision values."""


class UndefinedRateError(SpliceFuseError):
    """A sensitivity/specificity denominator is zero."""
