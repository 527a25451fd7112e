"""Exception hierarchy shared by all modules."""


class NdMetroError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(NdMetroError, ValueError):
    pass


class InvalidArgumentError(NdMetroError, ValueError):
    pass


class ParseError(NdMetroError, ValueError):
    """A file could not be decoded. ``reason`` is a short machine-stable tag."""

    def __init__(self, reason, detail=""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class ValidationError(NdMetroError, ValueError):
    pass


class InvalidImageError(NdMetroError, ValueError):
    pass


class SceneTooLargeError(NdMetroError, ValueError):
    pass


class DegenerateHistogramError(NdMetroError, ValueError):
    pass


class InvalidDatasetError(NdMetroError, ValueError):
    pass


class UndefinedCorrelationError(NdMetroError, ValueError):
    pass


class FitError(NdMetroError, ValueError):
    pass
