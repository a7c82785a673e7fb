"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`KindepError`
so callers (and the CLI) can tell configuration/experiment failures apart from
programming errors.
"""


class KindepError(Exception):
    pass


class ConfigError(KindepError, ValueError):
    """Bad input to an operation; the CLI maps these to exit status 2."""


class ExperimentError(KindepError):
    """A well-formed request that cannot be carried out; CLI exit status 3."""


class NoPrimeInInterval(ExperimentError):
    pass


class DomainError(ConfigError):
    pass


class BiasBoundViolated(ConfigError):
    pass


class EnumerationTooLarge(ConfigError):
    pass


class UnsupportedN(ConfigError):
    pass


class DenominatorMismatch(ConfigError):
    pass


class HypothesisViolated(ExperimentError):
    pass


class RedrawLimitExceeded(ExperimentError):
    pass


class InvalidSets(ConfigError):
    pass


class CellCountTooLow(ConfigError):
    pass


class InsufficientPoints(ConfigError):
    pass


class UnknownExperiment(ConfigError):
    pass
