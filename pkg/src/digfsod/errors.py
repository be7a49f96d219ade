"""Exception types shared across the package.

Plain ``ValueError`` / ``KeyError`` / ``OSError`` are used for bad arguments,
missing lookups and I/O; the classes here cover domain failures that callers
are expected to handle explicitly.
"""


class StateError(RuntimeError):
    """An operation was invoked on an object in the wrong lifecycle stage."""


class TrainingError(RuntimeError):
    """Training diverged or failed to reach its configured target."""


class FormatError(ValueError):
    """A serialized file is corrupt, truncated or has the wrong version."""


class CompositionError(RuntimeError):
    """No valid placement could be found for any slice on a canvas."""


class OracleRejectedError(RuntimeError):
    """The oracle classifier did not reach the required real-data accuracy."""
