"""Exception hierarchy shared by every fcopt module."""


class FCOptError(Exception):
    """Base class for all fcopt errors."""


class DimensionError(FCOptError, ValueError):
    pass


class NotSPDError(FCOptError, ValueError):
    """Raised when a Cholesky factorization hits a non-positive pivot."""


class ConfigError(FCOptError, ValueError):
    """Invalid method configuration or problem data (CLI exit code 2)."""


class InapplicableMethodError(ConfigError):
    """The chosen method's preconditions do not hold for this problem."""


class UndefinedConditionNumberError(ConfigError):
    pass


class InconsistentConstantsError(ConfigError):
    pass


class DomainError(FCOptError, ValueError):
    pass


class ModelInfeasibleError(FCOptError):
    """The auxiliary model problem has an empty feasible set (dual unbounded)."""


class ConvergenceError(FCOptError):
    """An iterative solver ran out of budget (CLI exit code 3).

    ``best`` carries the best iterate found so far, ``residual`` its
    optimality residual.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
