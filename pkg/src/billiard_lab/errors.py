"""Exception hierarchy shared by every stage of the pipeline."""


class BilliardError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""


class ConfigError(BilliardError):
    pass


class BadSpec(ConfigError):
    pass


class ConvexityViolation(ConfigError):
    pass


class OrderTooHigh(ConfigError):
    pass


class NonFiniteIntegrand(BilliardError):
    pass


class CoincidentPoints(BilliardError):
    pass


class TangencyGuard(BilliardError):
    pass


class NumericalError(BilliardError):
    """Iterative procedure did not reach its target."""


class NoConvergence(NumericalError):
    pass


class OrderCollapse(NumericalError):
    pass


class NonMonotone(NumericalError):
    pass


class InsufficientSamples(BilliardError):
    pass


class IllConditioned(NumericalError):
    pass
