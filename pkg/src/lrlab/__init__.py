"""Numerical laboratory for Lieb-Robinson light cones and finite-volume Heisenberg dynamics."""
__version__ = "0.1.0"

from .errors import (ConfigError, InvalidArgument, LabError, PreconditionViolation,  # noqa: F401
                     ResourceLimitError, UnsupportedBackend)
from .lattice import MetricGraph, make_chain, make_grid  # noqa: F401
from .algebra import AlgebraContext, LatticeOperator  # noqa: F401
from .localization import DecayFunction  # noqa: F401
from .zerochain import ZeroChain  # noqa: F401
from .propagator import PropagatorPlan, evolve  # noqa: F401
