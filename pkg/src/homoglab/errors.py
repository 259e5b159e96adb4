"""Exception hierarchy shared by the solvers and the orchestration layer."""


class HomogLabError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(HomogLabError, ValueError):
    """A specification violates one of its invariants.

    Attributes
    ----------
    hypothesis : str
        Short name of the violated condition.
    """

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"[{hypothesis}] {message}")
        self.hypothesis = hypothesis


class ConfigError(HomogLabError, ValueError):
    """Malformed or inconsistent configuration file."""


class CFLViolation(HomogLabError, ValueError):
    """Time step too large for a monotone update."""


class NumericalAnomaly(HomogLabError, RuntimeError):
    """NaN, range breach or other sign that a computation went wrong."""


class BoundaryReached(NumericalAnomaly):
    """The front touched the edge of the computational box."""


class DeadlineExceeded(NumericalAnomaly):
    """A target was not reached within the a-priori time bound."""


class HypothesisViolation(HomogLabError, AssertionError):
    """A structural inequality failed beyond its tolerance."""
