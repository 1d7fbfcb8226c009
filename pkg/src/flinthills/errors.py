"""Exception taxonomy shared across the toolkit.

The split mirrors how callers must react: domain errors are caller bugs,
hypothesis violations mean a theorem's precondition failed (the analysis
would be meaningless), precision exhaustion is a certification failure that
may still carry a valid partial result, and resource limits are hard stops.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class HypothesisViolation(ValueError):
    """A stated precondition of the underlying result does not hold."""


class InfeasiblePlanError(HypothesisViolation):
    """No partition plan exists for the requested parameters."""


class DegenerateDenominatorError(ValueError):
    """Combined approximation has denominator 1; its exponent is undefined.

    The combined error enclosure is still well-defined and is attached as
    ``.error`` so callers can inspect it.
    """

    def __init__(self, message, error=None):
        super().__init__(message)
        self.error = error


class PrecisionExhausted(RuntimeError):
    """The precision ladder was exhausted before the result was certified.

    ``partial`` carries whatever was certified before the failure (for
    continued-fraction expansion: the expansion with the terms that were
    certified; ``terms_certified`` counts them).
    """

    def __init__(self, message, partial=None, terms_certified=None):
        super().__init__(message)
        self.partial = partial
        self.terms_certified = terms_certified


class ResourceLimitError(RuntimeError):
    """A configured hard resource ceiling would be exceeded."""


class DigitBudgetError(ResourceLimitError):
    """A constructed partial quotient would exceed the digit budget."""

    def __init__(self, message, term_index=None):
        super().__init__(message)
        self.term_index = term_index
