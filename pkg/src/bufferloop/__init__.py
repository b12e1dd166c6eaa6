"""Buffer-feedback regulation: transfer-function algebra, fundamental limits and simulation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BufferLoopError,
    DegenerateInputError,
    HypothesisViolation,
    ImproperError,
    ModelError,
    NumericalFailure,
    PoleProximityError,
    SimulationError,
    StabilityError,
    UnboundedLimitError,
)
from .ratcalc import Polynomial, RationalTF, RootSet, limit_sL, poly_roots, tf_eval, tf_minreal  # noqa: E402
from .plantmodel import LinearPlant, NonlinearModel, is_internally_stable, linearize, realize_closed_loop  # noqa: E402
from .looptf import assemble, build_buffer, build_loops, build_open_loop, frequency_response  # noqa: E402
from .limits import analyze, bode_lhs_numeric, bode_rhs, peak_bound, peak_numeric, weighted_lhs_numeric, weighted_rhs  # noqa: E402
from .simkit import stability_boundary_gain, step_response  # noqa: E402
from .glycolysis import GlycolysisParams  # noqa: E402

__all__ = [
    "BufferLoopError", "DegenerateInputError", "HypothesisViolation", "ImproperError", "ModelError",
    "NumericalFailure", "PoleProximityError", "SimulationError", "StabilityError", "UnboundedLimitError",
    "Polynomial", "RationalTF", "RootSet", "limit_sL", "poly_roots", "tf_eval", "tf_minreal",
    "LinearPlant", "NonlinearModel", "is_internally_stable", "linearize", "realize_closed_loop",
    "assemble", "build_buffer", "build_loops", "build_open_loop", "frequency_response",
    "analyze", "bode_lhs_numeric", "bode_rhs", "peak_bound", "peak_numeric", "weighted_lhs_numeric", "weighted_rhs",
    "stability_boundary_gain", "step_response", "GlycolysisParams",
]
