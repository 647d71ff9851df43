"""Shared exception types."""


class ConfigurationError(ValueError):
    """A spec, config file, or wiring between components is invalid."""


class InfeasibleMedianError(ValueError):
    """No triangular distribution has the requested median."""


class EmptyResultError(ValueError):
    """An estimator was asked to summarize zero successful evaluations."""


class ComparabilityError(ValueError):
    """Run results do not share design/model/N and cannot be compared."""


class DegenerateFitError(ValueError):
    """A rate fit was requested on data with no usable (positive) errors."""
