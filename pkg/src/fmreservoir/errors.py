"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class UsageError(ValueError):
    """Inconsistent shapes, unknown names or malformed configuration."""


class NumericalInstabilityError(ArithmeticError):
    """The simulated state stopped being finite.

    Attributes:
        step: index of the first input step that produced a non-finite value.
    """

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite reservoir state at step {step}")
