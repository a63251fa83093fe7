"""Exception types shared across the package."""


class CsiImitationError(Exception):
    """Base class for package errors."""


class GraphFormatError(CsiImitationError, ValueError):
    """Malformed graph or model description.

    ``location`` is a JSON-path style pointer (``edges[2].labels[0]``) or a
    ``line:col`` pair when the text itself could not be parsed.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class ZeroMassContext(CsiImitationError):
    """Conditioning event has probability zero."""

    def __init__(self, event=None):
        self.event = event
        super().__init__(f"zero probability event: {event}")


class AbsoluteContinuityError(CsiImitationError, ValueError):
    """KL divergence requested where q vanishes but p does not."""


class ResourceLimitError(CsiImitationError):
    """Enumeration would exceed the configured state cap."""
