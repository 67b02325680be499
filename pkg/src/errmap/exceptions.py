"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration/usage problems exit 2,
numerical failures exit 3, file/format problems exit 4.
"""


class ErrmapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ErrmapError):
    """Invalid configuration, usage, or problem/grid setup."""


class InputError(ConfigError):
    """A runtime input (point, shape, field) violates a precondition."""


class SolverError(ErrmapError):
    """A linear solve broke down or failed to converge."""


class StabilityError(SolverError):
    """An explicit time-stepping scheme would violate its stability bound."""


class CheckpointError(ErrmapError):
    """A checkpoint file is malformed or inconsistent with its header."""


class TrainingError(ErrmapError):
    """Training diverged or produced non-finite quantities."""
