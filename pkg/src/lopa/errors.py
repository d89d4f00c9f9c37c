"""Exception hierarchy.

Failures that are legitimate verdicts (a system that is not hyperbolic, a
boundary condition that violates the Lopatinski condition on a grid) are
returned inside reports.  The exceptions below signal that an operation
cannot produce its result at all.
"""


class LopaError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(LopaError, ValueError):
    """A system document is missing fields or has extra/inconsistent ones."""


class DimensionMismatch(LopaError, ValueError):
    """Matrix shapes disagree with the declared dimensions."""


class CharacteristicBoundary(LopaError):
    """The boundary-normal matrix is singular to tolerance."""

    def __init__(self, message, sigma_min=None):
        super().__init__(message)
        self.sigma_min = sigma_min


class Infeasible(LopaError):
    """No positive definite Friedrichs symmetrizer was found."""

    def __init__(self, message, best_lambda_min=None):
        super().__init__(message)
        self.best_lambda_min = best_lambda_min


class RankDeficient(LopaError):
    pass


class WrongBoundaryCount(LopaError):
    pass


class NotNegativeOnKernel(LopaError):
    pass


class DegenerateSplitting(LopaError):
    pass


class NearImaginaryEigenvalue(LopaError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DimensionAnomaly(LopaError):
    pass


class ResonantMode(LopaError):
    pass


class LopatinskiSingular(LopaError):
    def __init__(self, message, sigma=None):
        super().__init__(message)
        self.sigma = sigma


class RankMismatch(LopaError):
    pass


class ChainViolation(LopaError):
    pass


class InvalidGrid(LopaError, ValueError):
    pass


class InvalidWeights(LopaError, ValueError):
    pass


class EllipticityFailure(LopaError):
    pass


class HyperbolicBlockCharacteristic(LopaError):
    pass


class StructuralFailure(LopaError):
    """A second-order system has the wrong block structure."""
