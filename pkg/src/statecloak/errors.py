"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions, invalid parameters, or exceeded budgets."""


class InfeasibleTargetError(ValueError):
    """Terminal state unreachable at the requested horizon."""


class UndefinedPosteriorError(ValueError):
    """Observation has zero probability under every admissible preimage."""


class ExcludedPointError(ValueError):
    """Input sits on the codec's measure-zero excluded point."""


class ValidationError(ValueError):
    """A config document violates the scenario schema."""
