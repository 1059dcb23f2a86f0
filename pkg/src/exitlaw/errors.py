"""Exception and warning types shared across the package."""


class KillingNotAlmostSureError(RuntimeError):
    """The killed process can survive forever with positive probability."""

    def __init__(self, detail=""):
        msg = "killing not almost sure"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class DomainError(ValueError):
    """A state label or position lies outside the domain of a rate function."""


class InvalidGeneratorError(ValueError):
    pass


class ReducibleChainError(ValueError):
    """Raised when a chain required to be irreducible is not.

    ``classes`` holds the communicating classes as lists of state labels.
    """

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = [list(c) for c in classes]


class ConvergenceError(RuntimeError):
    pass


class DegenerateMarginalError(ValueError):
    pass


class NonIntegrableWarning(RuntimeWarning):
    """Mean excursion length appears infinite; regenerative averages are unreliable."""
