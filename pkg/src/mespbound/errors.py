class InputError(ValueError):
    """Malformed or out-of-range user input (files, shapes, s, ...)."""


class DomainError(ArithmeticError):
    """A numerical precondition failed (matrix not PD, singular, rank too low)."""

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class InfeasibleError(DomainError):
    """The feasible region is empty."""
