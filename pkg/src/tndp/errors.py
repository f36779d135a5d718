"""Exception hierarchy shared by every tndp module."""


class TNDPError(Exception):
    """Base class for all package errors."""


class ParseError(TNDPError):
    """A data file could not be parsed.

    Carries the offending file and 1-based line number when known, so the CLI
    can point the user at the exact row.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(TNDPError, ValueError):
    """Parsed data violates a model invariant."""


class DimensionMismatch(TNDPError, ValueError):
    pass


class DomainError(TNDPError, ValueError):
    """Argument outside the domain of a function (e.g. negative flow)."""


class OutOfRange(TNDPError, ValueError):
    pass


class UnreachableDestination(TNDPError):
    """A destination with positive demand cannot be reached from its origin."""

    def __init__(self, origin, destination):
        self.origin = origin
        self.destination = destination
        super().__init__(f"node {destination} is unreachable from origin {origin}")


class NonFiniteValue(TNDPError, ArithmeticError):
    """Travel times or flows overflowed; the instance data is pathological."""


class InitializationStall(TNDPError):
    """Rejection sampling of a budget-feasible swarm exceeded its draw cap."""


class EmptyRegion(TNDPError):
    """A region partition left one side without any cells."""
