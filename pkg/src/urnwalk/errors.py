"""Exception hierarchy shared across the package."""


class UrnWalkError(Exception):
    """Base class for all package-specific errors."""


class DomainError(UrnWalkError):
    """A point lies outside its required domain (simplex or 3-d analogue)."""


class SampleSizeError(UrnWalkError):
    """Requested sample size is incompatible with the sampling scheme."""


class InvalidSizeError(UrnWalkError):
    """Sample size k is not a positive integer."""


class ReinforcementRangeError(UrnWalkError):
    """A reinforcement function returned a value outside [0, 1]."""


class CapabilityError(UrnWalkError):
    """Requested operation needs smoothness metadata the spec does not declare."""


class CostGuardError(UrnWalkError):
    """Exact summation would exceed the configured cost budget."""


class ConvergenceError(UrnWalkError):
    """Fixed-point iteration failed to converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class CaseError(UrnWalkError):
    """A regime/coefficient combination was requested outside its case split."""


class HypothesisError(UrnWalkError):
    """Parameters fall outside the stated hypotheses of the limit theorems."""


class IntegrationError(UrnWalkError):
    """An ODE path left its invariant domain beyond tolerance."""


class ConfigError(UrnWalkError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, message, line=None, column=None, field=None):
        super().__init__(message)
        self.line = line
        self.column = column
        self.field = field
