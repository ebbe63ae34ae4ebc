"""Exception hierarchy for twistfp."""


class TwistfpError(Exception):
    """Base class for all twistfp errors."""


class NotBoundaryPreserving(TwistfpError):
    """A map moved a point off the boundary circle it should preserve."""


class SingularJacobian(TwistfpError):
    """|det Df| fell below the diffeomorphism threshold at a sample."""


class StepFailure(TwistfpError):
    """Adaptive integration underflowed the minimum step size."""


class NewtonDiverged(TwistfpError):
    """Newton iteration ran out of iterations or hit a singular system."""


class CenterCollision(TwistfpError):
    """An orbit iterate landed on the rotation center."""


class NotStarShaped(TwistfpError):
    """An orbit closure is not a radial graph about the chart center."""


class ChartGapError(TwistfpError):
    """Inner and outer chart curves are not radially separated."""


class DegenerateField(TwistfpError):
    """The sampled displacement field vanishes on a large grid fraction."""


class ExtractionError(TwistfpError):
    """Contour assembly failed (open chain or inconsistent topology)."""


class NoCriticalPoints(TwistfpError):
    """A component carries no vertical-tangency points at all."""


class OnlyDegenerateCriticals(TwistfpError):
    """A component has vertical tangencies but none are non-degenerate."""


class HitBoundary(TwistfpError):
    """A vertical path segment reached the annulus boundary.

    For a genuine twist-map invariant set this cannot happen; it signals a
    hypothesis breach (e.g. a mixed-sign component upstream) or a bug.
    """


class NoIntersection(TwistfpError):
    """A vertical path segment found no curve to land on."""


class PathRuleViolation(TwistfpError):
    """A generated path broke one of the sign rules it was built from."""


class CrossoverDetected(TwistfpError):
    """The image of a path crossed over the path itself."""

    def __init__(self, message, junction=None):
        super().__init__(message)
        self.junction = junction


class OnCurve(TwistfpError):
    """Winding-number base point lies on the curve."""


class WholeComponentFixed(TwistfpError):
    """An entire component is pointwise fixed (a fixed circle, not points)."""

    def __init__(self, message, component_id=None):
        super().__init__(message)
        self.component_id = component_id


class OddIntersection(TwistfpError):
    """A component met the excision circle an odd number of times."""


class NoCriticalFreeStrip(TwistfpError):
    """No vertical strip free of critical points could be found."""


class TheoremViolationWitness(TwistfpError):
    """Carries a closed loop whose enclosed measure is not preserved.

    Raised when the fixed-point search comes up empty while every component
    translates monotonically: the witness loop then certifies that the input
    map does not actually admit a positive integral invariant.
    """

    def __init__(self, message, verdict=None, loop=None):
        super().__init__(message)
        self.verdict = verdict
        self.loop = loop
