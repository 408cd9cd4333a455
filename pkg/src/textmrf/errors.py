"""Exception types raised across textmrf."""


class TextMrfError(Exception):
    """Base class for every error raised by this package."""


class NotFound(TextMrfError, FileNotFoundError):
    pass


class DecodeError(TextMrfError):
    pass


class DimensionMismatch(TextMrfError, ValueError):
    pass


class MaskTooSmall(TextMrfError, ValueError):
    pass


class ImageTooSmall(TextMrfError, ValueError):
    pass


class InvalidK(TextMrfError, ValueError):
    pass


class EmptyCorpus(TextMrfError, ValueError):
    pass


class RatioInvalid(TextMrfError, ValueError):
    pass


class EmptyDataset(TextMrfError, ValueError):
    pass


class RootMissing(TextMrfError, FileNotFoundError):
    pass


class NoPairsFound(TextMrfError):
    pass


class StageError(TextMrfError):
    """Wraps a failure inside one stage of the refinement pipeline."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
