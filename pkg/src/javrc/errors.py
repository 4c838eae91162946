"""Exception hierarchy shared across the pipeline."""


class JavrcError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(JavrcError):
    pass


class UnsupportedFormat(JavrcError):
    pass


class EmptyInput(JavrcError):
    pass


class IncompatibleFingerprints(JavrcError):
    pass


class OracleTooLarge(JavrcError):
    pass


class UseLagrangianMode(JavrcError):
    """The exact DP state grid would exceed the configured cell budget."""


class InconsistentAllocation(JavrcError):
    pass


class EmptyDatabase(JavrcError):
    pass


class ConfigError(JavrcError):
    pass
