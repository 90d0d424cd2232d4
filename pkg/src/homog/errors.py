"""Exception types shared across the package."""


class HomogError(Exception):
    """Base class for all package-specific errors."""


class NotSPDError(HomogError):
    """A matrix required to be symmetric positive definite is not."""


class InvalidElasticError(HomogError):
    """Elastic constants outside their admissible range."""


class InvalidParamsError(HomogError):
    """Material parameter vector violates its invariants."""


class SnapBackError(HomogError):
    """Requested fracture energy cannot be dissipated at this element size
    without a snap-back in the constitutive curve."""


class OutOfSegmentError(HomogError):
    """Abscissa outside the span of a Bezier segment."""


class GeometryError(HomogError):
    """RVE geometry parameters do not tile."""


class DivergedError(HomogError):
    """Newton iteration failed to converge after step bisection."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RankDeficientError(HomogError):
    """Strain block does not span the three Voigt directions."""


class NotPositiveDefiniteError(NotSPDError):
    """Symmetrized elasticity matrix lost positive definiteness."""


class SingularError(HomogError):
    """Mapping matrix is not invertible."""


class OutOfBoundsError(HomogError):
    """Parameter vector outside the declared bounds."""


class NoProgressError(HomogError):
    """Optimizer produced no accepted step within its startup budget."""


class MalformedDataError(HomogError):
    """An input file does not follow its declared schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
