"""Exception hierarchy shared by all modules."""


class SemidecayError(Exception):
    """Base class for every error raised by this package."""


class WeightRangeError(SemidecayError, ValueError):
    """A weight was evaluated outside its validity interval."""


class InfeasibleError(SemidecayError, ValueError):
    """Parameters violate a precondition of a bound (e.g. ``t < a + b``)."""


class NumericalFailure(SemidecayError, RuntimeError):
    """Base class for failures of a numerical procedure."""


class IntegrationError(NumericalFailure):
    """The ODE integrator failed.

    ``location`` holds the abscissa where the failure occurred, if known.
    """

    def __init__(self, msg, location=None):
        super().__init__(msg)
        self.location = location


class ConvergenceError(NumericalFailure):
    """An iterative method did not converge.

    The best value found and the final gradient norm are kept so that callers
    can still report them.
    """

    def __init__(self, msg, best_value=None, grad_norm=None):
        super().__init__(msg)
        self.best_value = best_value
        self.grad_norm = grad_norm


class ConfigError(SemidecayError, ValueError):
    """Invalid run configuration."""
