"""twistfp: fixed points of annulus twist maps.

Hypothesis checkers (twist condition, positive integral invariant), the
forced-pendulum period map with variational monodromy, Newton shooting for
periodic cycles, invariant-curve extraction on the annulus, the directed
path machinery over critical points, fixed-point certification with
Poincare-Hopf indices, and the ball-excision area audit.
"""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
