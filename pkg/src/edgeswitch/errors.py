"""Exception types shared across the package."""


class EdgeSwitchError(Exception):
    """Base class for user-facing errors (bad input, bad configuration)."""


class NotGraphical(EdgeSwitchError, ValueError):
    """No simple graph realizes the requested degree sequence."""


class RetriesExhausted(EdgeSwitchError):
    pass


class InvalidGraph(EdgeSwitchError, ValueError):
    """Edge-list input violates a structural requirement (loops, duplicates, id width)."""


class TooLarge(EdgeSwitchError, ValueError):
    pass


class UnknownState(EdgeSwitchError):
    """A sampled graph lies outside the enumerated state space."""


class InsufficientData(EdgeSwitchError):
    pass


class Busy(EdgeSwitchError):
    """The requested edge is locked by another thread."""


class InvariantViolation(RuntimeError):
    """Internal consistency check failed; indicates a bug, not bad input."""


class StaleTicket(InvariantViolation):
    pass
