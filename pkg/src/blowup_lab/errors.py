"""Exception types shared across the package."""


class BlowupLabError(Exception):
    """Base class for all package errors."""


class DomainError(BlowupLabError, ValueError):
    """Evaluation requested outside the exterior domain of a metric."""


class ConvergenceError(BlowupLabError, RuntimeError):
    """An iterative solve did not converge."""


class ConstraintViolation(BlowupLabError, ValueError):
    """A data-family parameter inequality is violated."""


class InsufficientRangeError(BlowupLabError, ValueError):
    """Sample range too narrow for a log-log fit."""


class RegimeError(BlowupLabError, ValueError):
    """Power outside the subcritical blow-up regime."""


class ChartError(BlowupLabError, ValueError):
    """Null chart does not cover the requested point."""


class RegionError(BlowupLabError, ValueError):
    """Point outside the outgoing region."""


class WindowError(BlowupLabError, ValueError):
    """Time outside the validity window of the light-cone functional."""


class SupportError(BlowupLabError, ValueError):
    """Field support touches the integration shell boundary."""


class ConfigError(BlowupLabError, ValueError):
    """Malformed or inconsistent configuration."""


class InsufficientDataError(BlowupLabError, ValueError):
    """Too few records for a fit."""
