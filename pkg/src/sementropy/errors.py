"""Exception types shared across the toolkit.

Two failure families matter to callers: input/contract violations
(:class:`ValidationError`, CLI exit code 1) and remote scorer/endpoint
failures (:class:`BackendError`, CLI exit code 2).
"""


class SementropyError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SementropyError, ValueError):
    """Invalid input data, configuration, or metric precondition."""


class PairingError(ValidationError):
    """Two datasets that should be wording-only variants of each other are not."""


class BackendError(SementropyError, RuntimeError):
    """A remote endpoint (sampling or scorer service) failed."""
