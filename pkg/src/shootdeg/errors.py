"""Exception hierarchy shared by every module."""


class ShootDegError(Exception):
    """Base class for all package errors."""


class DomainError(ShootDegError, ValueError):
    """A point lies outside the domain where a function is defined."""


class EvalError(ShootDegError):
    """Evaluating a vector field or expression failed."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ExprSyntaxError(ShootDegError, ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ShootDegError, ValueError):
    def __init__(self, name):
        super().__init__(f"unknown identifier {name!r}")
        self.name = name


class UnknownSystem(ShootDegError, KeyError):
    pass


class MissingParam(ShootDegError, KeyError):
    pass


class InvalidBoundaryPoint(ShootDegError, ValueError):
    pass


class InvalidInput(ShootDegError, ValueError):
    pass


class NotAWallHit(ShootDegError):
    pass


class BlowupError(ShootDegError):
    """The shot left every bounded region before touching the wall."""

    def __init__(self, message, r_stop=None):
        super().__init__(message)
        self.r_stop = r_stop


class TargetOnBoundaryImage(ShootDegError):
    pass


class GridTooCoarse(ShootDegError):
    pass


class NoSwitchFound(ShootDegError):
    pass


class BudgetExhausted(ShootDegError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class QuadratureFailure(ShootDegError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class NotADirichletSolution(ShootDegError):
    pass


class UnsupportedSystem(ShootDegError):
    pass


class ConfigError(ShootDegError):
    """Raised for malformed or invalid run configuration files."""

    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key


class ConfigParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


class StepLimitReached(ShootDegError):
    pass
