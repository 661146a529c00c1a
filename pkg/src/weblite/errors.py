"""Exception hierarchy shared across the package."""


class WebliteError(Exception):
    """Base class for all package errors."""


class ParseError(WebliteError):
    """Input file or stream could not be parsed."""


class UnsupportedFormat(WebliteError):
    """Declared manifest format is not one we ingest."""


class MismatchedSite(WebliteError):
    """Manifest pair does not belong to the same top-level site."""


class MissingGeometry(WebliteError):
    """Operation needs native image dimensions that are unknown."""


class CorruptHeader(WebliteError):
    """Byte prefix matches a format signature but the structure is invalid."""


class CorruptPayload(WebliteError):
    """Payload cannot be decoded at all."""


class NotBaseline(WebliteError):
    """Row accounting requested for a progressive image."""


class NetworkError(WebliteError):
    """Transport-level failure talking to an origin."""


class MalformedContentRange(WebliteError):
    """206 response with an unusable Content-Range header."""


class HttpStatus(WebliteError):
    """Non-success HTTP status propagated to the caller."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(message or f"HTTP {status}")


class HeaderTooLarge(WebliteError):
    """Image header did not fit within the extension cap."""


class NothingToRewrite(WebliteError):
    """Rewrite requested with no rule matches."""


class NothingToFill(WebliteError):
    """Reflection fill invoked with nothing missing (or nothing decoded)."""


class DimensionMismatch(WebliteError):
    """Metric inputs have different dimensions."""


class DecodeError(WebliteError):
    """Image body could not be decoded."""


class EncodeError(WebliteError):
    """Raster could not be encoded to the requested format."""
