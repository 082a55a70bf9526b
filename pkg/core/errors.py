# core/errors.py
# Exception hierarchy shared by every module.


class MosLabError(Exception):
    """Base class for all errors raised by the library."""


class ContractViolation(MosLabError, ValueError):
    """A pre-condition, shape or range check failed."""


class UnknownTokenError(ContractViolation):
    """A character-mode encode met a character that is not in the vocabulary."""

    def __init__(self, token: str):
        self.token = token
        super().__init__(f"Unknown character {token!r} is not in the vocabulary.")


class NumericalFailure(MosLabError, ArithmeticError):
    """An iterative numerical routine did not converge."""

    def __init__(self, message: str, sweeps: int):
        self.sweeps = sweeps
        super().__init__(message)


class TrainingFailure(MosLabError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"Training diverged at step {step}: NLL = {value}")


class FittingFailure(MosLabError):
    """Synthetic head fitting produced a non-finite objective."""

    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"Fitting diverged at iteration {step}: KL = {value}")


class CheckpointFormatError(MosLabError):
    """A checkpoint file is malformed, truncated or of an unsupported version."""
