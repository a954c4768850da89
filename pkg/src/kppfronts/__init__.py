"""kppfronts: critical front speeds of heterogeneous Fisher-KPP equations.

Computes the existence speed from the linearized periodic-cell solution and
least means, the non-existence bound from generalized principal eigenvalues
(Floquet realization), and verifies both against nonlinear front
simulations and closed-form special cases.
"""

__version__ = "0.1.0"

from .backends import BACKEND  # noqa: F401
