"""Exception types shared across the package."""


class RodGammaError(Exception):
    pass


class DomainError(RodGammaError):
    """A point lies outside the coordinate domain of a chart."""


class ChartValidityError(RodGammaError):
    """The metric evaluated to a non-SPD matrix."""


class ConventionError(RodGammaError):
    """Curvature symmetries fail beyond tolerance."""


class ParseError(RodGammaError):
    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


class TruncationError(RodGammaError):
    """Geodesic integration left the chart domain."""

    def __init__(self, message, t_exit=None):
        self.t_exit = t_exit
        super().__init__(message)


class InjectivityError(RodGammaError):
    """Shooting for the logarithm map did not converge."""


class OrientationError(RodGammaError):
    pass


class LiftError(RodGammaError):
    pass


class KarcherError(RodGammaError):
    pass


class PreconditionError(RodGammaError):
    pass


class ConfigError(RodGammaError):
    pass
