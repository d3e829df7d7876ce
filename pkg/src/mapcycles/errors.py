"""Exception types raised across the package."""


class MapCyclesError(Exception):
    """Base class for all package errors."""


class ParseError(MapCyclesError, ValueError):
    """Malformed UAI input. ``offset`` is the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class InvalidAssignmentError(MapCyclesError, ValueError):
    pass


class ParameterError(MapCyclesError, ValueError):
    pass


class UnsupportedArityError(MapCyclesError, ValueError):
    pass


class InvalidCycleError(MapCyclesError, ValueError):
    pass


class AlreadyRegisteredError(MapCyclesError, ValueError):
    pass


class PreconditionError(MapCyclesError, RuntimeError):
    pass


class BudgetExceededError(MapCyclesError, RuntimeError):
    pass
