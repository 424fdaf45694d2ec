"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A parameter or config value is outside its allowed range.

    ``key`` is the dotted config path (or argument name) that failed.
    """

    def __init__(self, key, message):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


class NotInBasisError(KeyError):
    pass


class NumericalToleranceError(ArithmeticError):
    """A numerical audit (unitarity, convergence, reconstruction) failed."""
