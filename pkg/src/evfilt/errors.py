"""Exception types raised across the package."""


class EvfiltError(Exception):
    """Base class for all package errors."""


class StreamFormatError(EvfiltError):
    """A record in an event file could not be accepted.

    ``index`` is the zero-based record index (header excluded).
    """

    code = "MALFORMED_RECORD"

    def __init__(self, message, index=None):
        self.index = index
        where = f" at record {index}" if index is not None else ""
        super().__init__(f"{self.code}{where}: {message}")


class MalformedRecord(StreamFormatError):
    code = "MALFORMED_RECORD"


class OutOfBounds(StreamFormatError):
    code = "OUT_OF_BOUNDS"


class NonMonotonic(StreamFormatError):
    code = "NON_MONOTONIC"


class GeometryMismatch(EvfiltError):
    pass


class InsufficientBins(EvfiltError):
    pass


class UnlabeledEvents(EvfiltError):
    pass


class DegenerateScene(EvfiltError):
    pass
