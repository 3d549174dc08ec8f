"""Exception hierarchy shared by every module of the package."""


class PirError(Exception):
    """Base class for all package errors."""


class DivisionByZero(PirError, ZeroDivisionError):
    pass


class ShapeError(PirError, ValueError):
    pass


class SingularMatrix(PirError, ValueError):
    pass


class FieldTooSmall(PirError, ValueError):
    pass


class InvalidConfig(PirError, ValueError):
    pass


class InternalError(PirError, RuntimeError):
    """Raised when an invariant that should be impossible to break is broken."""


class TooLargeForExhaustive(PirError, ValueError):
    pass


class FormatError(PirError, ValueError):
    pass


class ProtocolError(PirError):
    pass


class RetrievalFailed(PirError):
    pass
