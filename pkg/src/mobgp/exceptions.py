"""Exception hierarchy shared by all mobgp modules."""


class MobGPError(Exception):
    """Base class for every error raised by mobgp."""


class EmptyInput(MobGPError, ValueError):
    pass


class InvalidTransitionMatrix(MobGPError, ValueError):
    pass


class InvalidCount(MobGPError, ValueError):
    pass


class DimensionError(MobGPError, ValueError):
    pass


class NotRegularGrid(MobGPError, ValueError):
    pass


class SingularFactor(MobGPError, ArithmeticError):
    pass


class NotPositiveDefinite(MobGPError, ArithmeticError):
    pass


class MaxIterations(MobGPError, RuntimeError):
    """Raised by iterative solvers that fail to reach the requested tolerance.

    The final relative residual is kept on ``residual``.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class OptimizationFailed(MobGPError, RuntimeError):
    """Hyperparameter optimisation produced a non-finite objective.

    ``trace`` holds the objective values seen before the failure.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ModelMismatch(MobGPError, ValueError):
    """A model was paired with data or a scheme it was not fitted on."""


class DegenerateData(MobGPError, ValueError):
    """Too few usable targets to fit a model."""
