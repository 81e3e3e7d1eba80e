"""
Exception hierarchy for mvlab.

All exceptions raised deliberately by the library derive
from :class:`MVLabError`, and additionally from the builtin
exception that best describes the problem so that callers
can keep catching :exc:`ValueError` and friends.
"""
from typing import Any, Dict, Optional


class MVLabError(Exception):
    """
    Base class for all mvlab errors.

    Attributes:
      details
        Machine readable information about the failure,
        written to ``error.json`` by the command-line tool.
    """

    details: Dict[str, Any]

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details


class ModelError(MVLabError, ValueError):
    """Unknown model, invalid model parameters or dimension mismatch."""


class MeasureError(MVLabError, ValueError):
    """Invalid measure or a violated estimator precondition."""


class DegenerateInputError(MVLabError, ValueError):
    """The requested quantity is indeterminate for the given input."""


class ConfigError(MVLabError, ValueError):
    """
    Invalid run configuration.

    Attributes:
      key
        Dotted path of the offending key, or :data:`None`
        for document level problems.
    """

    key: Optional[str]

    def __init__(self, message: str, key: Optional[str] = None, **details: Any):
        super().__init__(message, key=key, **details)
        self.key = key


class ConvergenceError(MVLabError, RuntimeError):
    """
    An iterative solver did not reach its tolerance.

    Attributes:
      residual
        Last observed residual

      iterations
        Number of iterations performed
    """

    residual: float
    iterations: int

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message, residual=residual, iterations=iterations)
        self.residual = residual
        self.iterations = iterations


class SimulationDiverged(MVLabError, FloatingPointError):
    """
    The particle state became NaN or infinite.

    Attributes:
      step
        Index of the Euler step that produced the bad value

      particle
        Index of the first offending particle
    """

    step: int
    particle: int

    def __init__(self, step: int, particle: int):
        super().__init__(
            f"non-finite state at step {step}, particle {particle}",
            step=step,
            particle=particle,
        )
        self.step = step
        self.particle = particle


class NonErgodicError(MVLabError, RuntimeError):
    """
    The frozen-measure dynamics left the configured moment bound.

    Attributes:
      moment
        Observed p-th moment when the bound was exceeded

      time
        Simulation time of the observation
    """

    moment: float
    time: float

    def __init__(self, moment: float, bound: float, time: float):
        super().__init__(
            f"p-th moment {moment:.6g} exceeds explosion bound {bound:.6g} "
            f"at t={time:.6g}; the decoupled dynamics look non-ergodic",
            moment=moment,
            bound=bound,
            time=time,
        )
        self.moment = moment
        self.time = time
