"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands or buffers do not have compatible shapes."""


class ScalarTermError(ValueError):
    """Tensor exp/log called outside its domain (wrong scalar term)."""


class NotLieElementError(ValueError):
    """Projection residual exceeded the gate: input is not a Lie element.

    Usually signals a bug upstream (e.g. projecting something that is not
    the logarithm of a group-like element) or badly scaled input.
    """


class TrainingDivergedError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")
