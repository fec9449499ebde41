"""Exception types shared across modules."""


class InapplicableRouteError(ValueError):
    """A computation route's hypotheses fail for the given walk."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge within its refinement budget."""


class NotAbsorbingError(RuntimeError):
    """The interior of a segment does not leak mass to its ends."""


class CertificationError(RuntimeError):
    """A numerical certificate could not be established."""
