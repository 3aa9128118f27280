"""Exception types shared across the package."""


class HawkesGraphError(Exception):
    """Base class for all package errors."""


class PsvParseError(HawkesGraphError):
    """Malformed pipe-separated input (bad row length, non-numeric cell, ...)."""


class ConfigError(HawkesGraphError):
    """Invalid configuration, e.g. a rule referencing an unknown measurement."""


class InsufficientDataError(HawkesGraphError):
    """Not enough rows to build the requested lag design (T <= d)."""


class DomainError(HawkesGraphError):
    """Linear predictor left the link function's domain (feasible-set breach)."""


class ValidationError(HawkesGraphError):
    """Invalid argument values (out-of-range nu, non-positive decay, ...)."""


class RankDeficiencyError(HawkesGraphError):
    """Gram matrix is rank deficient (lambda_1 <= 0), bounds undefined."""


class InfeasibleSetError(HawkesGraphError):
    """Constructed feasible set has no interior point."""


class CriterionUndefinedError(HawkesGraphError):
    """Evaluation criterion undefined on a degenerate test set."""


class FitFailureError(HawkesGraphError):
    """A model fit failed irrecoverably (e.g. too many bootstrap failures)."""
