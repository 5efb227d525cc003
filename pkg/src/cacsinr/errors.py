"""Exception hierarchy shared by the library and the command line.

Each class carries the process exit code the CLI maps it to.
"""


class CacsinrError(Exception):
    exit_code = 1


class ConfigurationError(CacsinrError, ValueError):
    """Inconsistent or malformed inputs (dimension mismatch, unknown key...)."""

    exit_code = 2


class DomainError(CacsinrError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class InfeasibleError(CacsinrError):
    """A class cannot meet its QoS target at any load.

    ``classes`` lists the offending class indices.
    """

    exit_code = 3

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = tuple(classes)
