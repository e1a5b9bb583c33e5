"""Exception hierarchy.

Everything derives from :class:`ValueError` so callers that only care about
"bad input" can catch that.
"""


class LoccSepError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(LoccSepError):
    """Operands live in spaces of different dimension."""


class NotNormalizedError(LoccSepError):
    """A vector that must be a unit vector is not."""


class IncompleteInstrumentError(LoccSepError):
    """Kraus operators do not resolve the identity."""


class PreconditionError(LoccSepError):
    """A documented precondition on numeric arguments does not hold."""


class UndefinedTaskError(PreconditionError):
    """The two hypotheses coincide (overlap 1), so the task is meaningless."""


class InfeasibleSeparationError(PreconditionError):
    """Target overlap exceeds source overlap."""


class ProtocolStructureError(LoccSepError):
    """A protocol tree is malformed.

    ``path`` is the sequence of outcome labels leading from the root to the
    offending node.
    """

    def __init__(self, path, message):
        self.path = tuple(path)
        self.message = message
        super().__init__(f"{format_path(self.path)}: {message}")


class ProtocolParseError(LoccSepError):
    """A protocol file could not be decoded; ``path`` addresses the JSON field."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


def format_path(path):
    return "/".join(("root",) + tuple(str(p) for p in path))
