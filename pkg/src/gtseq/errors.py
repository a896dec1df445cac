"""Semantic exception hierarchy for the gtseq package."""


class GtseqError(Exception):
    """Base error for this package."""


class ModelError(GtseqError, ValueError):
    """Model parameters violate their domain contract."""


class IdentifiabilityError(ModelError):
    """The misclassification setup makes the prevalence unidentifiable."""


class DomainError(GtseqError, ValueError):
    """A map was evaluated outside its analytic domain (e.g. negative radicand)."""


class InsufficientOrderError(GtseqError, ValueError):
    """A series coefficient beyond the truncation order was requested."""


class PlanError(GtseqError, ValueError):
    """A sampling plan is malformed or incompatible with the requested operation."""


class StepCapExceededError(GtseqError, RuntimeError):
    """A simulated walk hit the hard step cap without reaching the boundary."""


class ConfigError(GtseqError, ValueError):
    """Experiment configuration is invalid.  Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
