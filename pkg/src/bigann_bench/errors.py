"""Exception types shared across the toolkit."""


class BenchError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(BenchError):
    """Invalid arguments, parameters, or preconditions."""


class UnknownParameterError(ValidationError):
    """A build/search parameter map contained an unrecognized key."""


class FormatError(BenchError):
    """A file or byte stream does not match its declared layout."""


class ProtocolError(BenchError):
    """REST protocol failure: transport error, version mismatch, or a
    server-reported failure."""
