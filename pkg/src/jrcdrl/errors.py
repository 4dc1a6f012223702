"""Exception hierarchy shared across the package.

The CLI maps each family to a process exit code.
"""


class JRCError(Exception):
    exit_code = 1


class ConfigError(JRCError):
    exit_code = 2


class ContractViolation(JRCError, ValueError):
    exit_code = 4


class NotReady(JRCError):
    """Replay buffer holds fewer transitions than a batch needs."""


class WeightFileError(JRCError):
    exit_code = 3


class WeightFileMissing(WeightFileError, FileNotFoundError):
    pass


class VersionMismatch(WeightFileError):
    pass


class ShapeMismatch(WeightFileError):
    pass
