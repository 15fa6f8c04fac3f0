"""Exception types shared across the package."""


class NtkEvalError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(NtkEvalError):
    """Array arguments have incompatible lengths or shapes."""


# The network module raises the same condition under this name.
ShapeMismatch = DimensionMismatch


class NotFactorizable(NtkEvalError):
    """No jitter in the schedule made the matrix positive definite.

    Signals a badly scaled or indefinite input; the message records every
    jitter magnitude that was attempted.
    """


class InvalidMoment(NtkEvalError):
    """Arc-cosine moment inputs are not a valid covariance triple.

    Raised for non-positive self-covariances, or when the implied cosine
    overshoots [-1, 1] by more than the clamping tolerance (which indicates
    a bug in the upstream kernel recursion, not harmless round-off).
    """


class EmptyInput(NtkEvalError):
    """An operation that needs at least one element received none."""


class NonFiniteActivation(NtkEvalError):
    """A forward pass produced NaN or infinity."""


class NonFiniteLoss(NtkEvalError):
    """Training loss became NaN or infinite; message carries the epoch."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")


class InvalidConfig(NtkEvalError):
    """A configuration value is out of its documented range."""


class InconsistentModels(NtkEvalError):
    """Trial reports being aggregated do not share the same model set."""
