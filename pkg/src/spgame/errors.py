"""Exception hierarchy.

Every error carries a ``to_dict`` payload so the CLI can emit it as
machine-readable JSON. Errors tied to a structural assumption of the
problem carry the assumption label (``"3.1"``, ``"3.2a"``, ...).
"""

from __future__ import annotations


class SpGameError(Exception):
    """Base class for all library errors."""

    assumption: str | None = None

    def __init__(self, message: str = "", assumption: str | None = None, **details):
        super().__init__(message)
        self.message = message
        self.details = details
        if assumption is not None:
            self.assumption = assumption

    def to_dict(self) -> dict:
        out = {"error": type(self).__name__, "message": self.message}
        if self.assumption is not None:
            out["assumption"] = self.assumption
        for key in sorted(self.details):
            out[key] = self.details[key]
        return out


class SpecError(SpGameError):
    """Malformed game specification (shapes, symmetry, non-finite data)."""


class BlowUp(SpGameError):
    """Finite escape time of a Riccati flow."""

    def __init__(self, message: str = "", t_escape: float = float("nan"), assumption=None):
        super().__init__(message, assumption=assumption, t_escape=t_escape)
        self.t_escape = t_escape


class StepLimitExceeded(SpGameError):
    pass


class Delta2Singular(SpGameError):
    assumption = "3.1"


class NoStabilizingSolution(SpGameError):
    assumption = "3.2b"


class LambdaSingular(SpGameError):
    assumption = "3.2b"


class AssumptionFailed(SpGameError):
    def __init__(self, assumption: str, message: str = "", **details):
        super().__init__(message, assumption=assumption, **details)


class EnvelopeViolated(SpGameError):
    def __init__(self, message: str = "", tau: float = float("nan")):
        super().__init__(message, tau=tau)
        self.tau = tau


class GridMismatch(SpGameError):
    pass


class InsufficientPoints(SpGameError):
    pass


class KindMismatch(SpGameError):
    pass


class StepTooLarge(SpGameError):
    pass


class PathBlowUp(SpGameError):
    def __init__(self, message: str = "", path: int = -1, t: float = float("nan")):
        super().__init__(message, path=path, t=t)
        self.path = path
        self.t = t


class ConditionFailed(SpGameError):
    pass


class NotScalar(SpGameError):
    pass
