"""Exception hierarchy shared by all modules."""


class SixDMAError(Exception):
    """Base class for every error raised by this package."""


class GimbalLock(SixDMAError):
    pass


class DegenerateDirection(SixDMAError):
    pass


class InitializationFailed(SixDMAError):
    pass


class NonUnitDirection(SixDMAError):
    pass


class TooClose(SixDMAError):
    pass


class ZeroPosition(SixDMAError):
    pass


class NumericalFailure(SixDMAError):
    pass


class NonFiniteObjective(SixDMAError):
    pass


class LpFailure(SixDMAError):
    """Raised when a linear program cannot be solved."""


class Infeasible(LpFailure):
    pass


class Unbounded(LpFailure):
    pass


class ConfigError(SixDMAError):
    """Problem with an experiment configuration file."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
