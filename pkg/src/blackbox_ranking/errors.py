"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised for malformed inputs: non-finite scores, length mismatches, bad hyperparameters."""


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined, e.g. a query without relevant items."""


class DegenerateInputError(ValueError):
    """Raised by oracles that require generic (tie-free) inputs."""
