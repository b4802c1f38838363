"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class PosteriorStateError(RuntimeError):
    """A posterior was used in a state that does not permit the operation."""


class NumericalError(ArithmeticError):
    """A linear-algebra or floating-point failure."""


class ConvergenceError(NumericalError):
    """An iterative method ran out of iterations before reaching tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ConfigError(ValueError):
    """Invalid experiment configuration."""
