"""Exception types raised across the package."""


class MemptecError(Exception):
    """Base class for all library errors."""


class MalformedDocument(MemptecError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingName(MemptecError, ValueError):
    pass


class NotFound(MemptecError, LookupError):
    pass


class NetworkUnavailable(MemptecError, ConnectionError):
    pass


class UnsupportedHost(MemptecError, ValueError):
    pass


class BadLabel(MemptecError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownFeature(MemptecError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown feature"


class ClockSkew(MemptecError, ValueError):
    pass


class BadBase(MemptecError, ValueError):
    pass


class InsufficientBenign(MemptecError, ValueError):
    pass


class TooSmall(MemptecError, ValueError):
    pass


class BadProfile(MemptecError, ValueError):
    pass


class SingleClassTraining(MemptecError, ValueError):
    pass


class NonFiniteFeature(MemptecError, ValueError):
    pass


class BadHyperparam(MemptecError, ValueError):
    pass


class CatalogMismatch(MemptecError, ValueError):
    pass


class LengthMismatch(MemptecError, ValueError):
    pass


class TooManyFeaturesForExact(MemptecError, ValueError):
    pass


class EmptyPool(MemptecError, ValueError):
    pass


class IncompleteGrouping(MemptecError, ValueError):
    pass


class ConfigInvalid(MemptecError, ValueError):
    pass
