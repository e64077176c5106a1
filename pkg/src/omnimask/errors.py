"""Domain exceptions."""


class OmnimaskError(Exception):
    """Base class for all domain errors raised by this package."""


class CapturerNotFound(OmnimaskError):
    """No view produced a person mask passing the area threshold."""


class CoverageError(OmnimaskError):
    """A requested view tessellation cannot cover the sphere."""


class AdapterError(OmnimaskError):
    """The detector/segmenter adapter failed or broke protocol."""
