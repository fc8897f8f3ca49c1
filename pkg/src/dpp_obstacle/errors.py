"""Exception types raised across the package."""


class DppError(Exception):
    """Base class for all package errors."""


# mesh
class MeshError(DppError, ValueError):
    pass


class NonPositiveSpacing(MeshError):
    pass


class RadiusExceedsCollar(MeshError):
    pass


class NonIntegerRadius(MeshError):
    pass


class NotInterior(MeshError, IndexError):
    pass


# fields / problem data
class EvalDomainError(DppError, ValueError):
    pass


class ExpressionError(DppError, ValueError):
    pass


class UnknownDataset(DppError, KeyError):
    pass


class ExponentOutOfRange(DppError, ValueError):
    pass


class ValidationError(DppError, ValueError):
    """Problem data violates the obstacle ordering hypotheses."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = list(nodes)


class ObstacleOrderViolation(ValidationError):
    pass


class BoundaryOrderViolation(ValidationError):
    pass


# solver
class ShapeMismatch(DppError, ValueError):
    pass


class NonFiniteValue(DppError, ValueError):
    pass


class MaxIterationsExceeded(DppError, RuntimeError):
    def __init__(self, message, report=None, solution=None):
        super().__init__(message)
        self.report = report
        self.solution = solution


# game
class StepCapExceeded(DppError, RuntimeError):
    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class NonSolvedInput(DppError, ValueError):
    pass


# validation oracles
class DegenerateGradient(DppError, ArithmeticError):
    pass


# configuration
class ConfigError(DppError, ValueError):
    pass


class UnknownKey(ConfigError, KeyError):
    pass


class ConfigTypeError(ConfigError, TypeError):
    pass


class MissingRequired(ConfigError):
    pass
