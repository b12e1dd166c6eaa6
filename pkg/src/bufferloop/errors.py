"""Exception hierarchy shared by all bufferloop modules."""


class BufferLoopError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInputError(BufferLoopError, ValueError):
    """Input is structurally unusable (constant polynomial, zero denominator, ...)."""


class NumericalFailure(BufferLoopError, ArithmeticError):
    """An iterative method did not converge or produced non-finite values."""


class PoleProximityError(BufferLoopError, ZeroDivisionError):
    """A transfer function was evaluated on (or numerically at) one of its poles."""


class UnboundedLimitError(BufferLoopError, ValueError):
    """lim s*L(s) is infinite because L is not strictly proper."""


class ImproperError(BufferLoopError, ValueError):
    """A transfer function required to be proper is not."""


class StabilityError(BufferLoopError):
    """An operation requiring a stable system received an unstable one."""


class HypothesisViolation(BufferLoopError):
    """A precondition of a limit theorem does not hold."""


class ModelError(BufferLoopError, ValueError):
    """A model descriptor or parameter set is malformed or inconsistent."""


class SimulationError(BufferLoopError):
    """Time-domain simulation failed (overflow, bad step size)."""
