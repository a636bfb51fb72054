"""Numerical laboratory for coupled geometric flows of generalized Kahler structures.

Two interchangeable discretization backends are provided: periodic
coordinate grids (tori) and frame algebras (invariant tensors on Lie
groups, where the PDEs reduce to exact structure-constant algebra).
On top of them sit discrete tensor calculus, Hermitian/complex-structure
diagnostics, the coupled flow systems, diffeomorphism gauge transport,
and static-structure analysis.
"""

from .backends import TorusChart, PatchChart, FrameAlgebra
from .fields import TensorField, Metric
from . import operators
from . import complexgeo
from . import convergence
from . import flows
from . import io
from . import scenarios
from . import statics
from . import transport

__all__ = [
    "TorusChart",
    "PatchChart",
    "FrameAlgebra",
    "TensorField",
    "Metric",
    "operators",
    "complexgeo",
    "convergence",
    "flows",
    "io",
    "scenarios",
    "statics",
    "transport",
]

__version__ = "0.1.0"
