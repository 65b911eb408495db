class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class IllConditionedError(InvalidInputError):
    """A covariance is singular and no ridge was supplied."""


class ContractViolationError(RuntimeError):
    """A cached forward tape does not belong to the network being differentiated."""


class NonFiniteError(FloatingPointError):
    """A loss, activation or gradient became NaN or infinite."""


class RankDeficiencyWarning(UserWarning):
    """Input had deficient rank; the result relies on regularization or basis completion."""


class DegenerateTargetWarning(RankDeficiencyWarning):
    """The summed encodings had rank below F when solving for the shared target."""


class MetricDegeneracyWarning(UserWarning):
    """A clustering metric hit a degenerate case (single class, negative ARI)."""
