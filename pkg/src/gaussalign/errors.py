"""Exception hierarchy.

Everything deriving from :class:`ValidationError` is a problem with the
inputs (bad covariance, mismatched shapes, unknown identifiers); the CLI maps
these to exit code 2. Anything else is a runtime failure.
"""


class ValidationError(ValueError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    def __init__(self, block: str, min_eigenvalue: float):
        self.block = block
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"{block} is not positive definite (min eigenvalue {min_eigenvalue:.6g})")


class AsymmetryBeyondTolerance(ValidationError):
    def __init__(self, block: str, deviation: float):
        self.block = block
        self.deviation = deviation
        super().__init__(f"{block} is not symmetric (max |S - S^T| = {deviation:.3g})")


class PerfectCorrelation(ValidationError):
    """A canonical correlation reached 1, so the mutual information diverges."""


class NonFiniteInput(ValidationError):
    pass


class NonFiniteScore(ValidationError):
    pass


class IdentifierMismatch(ValidationError):
    pass


class InstanceTooLarge(ValidationError):
    pass
