"""Exception types shared across the package."""


class HeteroError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(HeteroError):
    """Raised when the map geometry cannot be constructed.

    Carries the name of the violated invariant (e.g. ``"no-zero-crossing"``,
    ``"delta>=b"``) so callers can distinguish a missing intersection from a
    malformed core.
    """

    def __init__(self, invariant: str, message: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}" if message else invariant)


class NoiseError(HeteroError):
    """Invalid noise specification or pathological sampling."""


class DomainEscape(HeteroError):
    """A chain step left the extended domain.

    Should be impossible when the truncation half-width respects the
    admissible bound; if it fires, the configuration is inconsistent.
    """

    def __init__(self, state: float, step: int):
        self.state = state
        self.step = step
        super().__init__(f"state {state!r} escaped the domain at step {step}")


class ModelBreakdown(HeteroError):
    """The micro-simulation produced a non-finite or nonpositive leverage."""

    def __init__(self, message: str, state=None):
        self.state = state
        super().__init__(message)
