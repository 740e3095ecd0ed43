"""Exception hierarchy shared by every module."""


class TransportError(Exception):
    """Base class for errors raised by mbpot."""


class InvalidInputError(TransportError, ValueError):
    """Malformed arguments: shape mismatches, bad weights, out-of-range parameters."""


class SolverFailureError(TransportError, RuntimeError):
    """A solver could not produce a plan (e.g. pivot safeguard exceeded)."""


class ResourceLimitError(TransportError):
    """A request exceeded a configured size cap."""


class UnsupportedInstanceError(InvalidInputError):
    """The brute-force oracle cannot represent the instance exactly."""
