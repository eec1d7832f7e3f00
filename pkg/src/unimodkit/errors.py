class UnimodError(Exception):
    """Base class for errors raised by unimodkit."""


class ParseError(UnimodError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CorrespondenceError(UnimodError, ValueError):
    """Raised when an operation's precondition on a correspondence fails."""


class NonUniformError(CorrespondenceError):
    def __init__(self, message, element=None):
        self.element = element
        super().__init__(message)


class SymbolicError(UnimodError, ValueError):
    """Ill-formed symbolic set or map."""


class RepairError(UnimodError, ValueError):
    pass


class VerificationError(UnimodError):
    """A certificate failed an independent check."""

    def __init__(self, message, target=None):
        self.target = target
        super().__init__(message)


class InternalInconsistency(UnimodError, RuntimeError):
    """A mathematically impossible outcome: indicates a bug in this library."""
