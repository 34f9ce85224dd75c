"""Exception hierarchy shared by all modules."""


class RobinBubbleError(Exception):
    pass


class DomainError(RobinBubbleError, ValueError):
    """Input outside the operation's domain (coincident points, exterior point, bad radius)."""


class ConstructionError(RobinBubbleError):
    """A solver or domain could not be built from the given parameters."""


class InvariantViolation(RobinBubbleError):
    """A quantity that must hold by theory failed numerically, usually solver inaccuracy."""


class BracketError(RobinBubbleError):
    pass


class ConfigError(RobinBubbleError, ValueError):
    pass
