"""Exception types shared across the package."""


class SimCloneError(Exception):
    """Base class for all errors raised by this package."""


class EmptyTableError(SimCloneError):
    """A parsed file yielded zero data rows or zero columns."""


class ConfigError(SimCloneError):
    """Invalid configuration or invalid argument combination."""


class TrainingError(SimCloneError):
    """Training data violates a training precondition."""


class SchemaError(SimCloneError):
    """Feature ordering metadata does not match the model."""


class PersistenceError(SimCloneError):
    """A persisted artifact is malformed or has an unsupported version."""


class MetricError(SimCloneError):
    """A metric is undefined for the given input."""


class InternalError(SimCloneError):
    """An invariant that the pipeline guarantees was violated."""
