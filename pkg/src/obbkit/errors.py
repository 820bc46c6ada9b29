"""Exception types shared across the toolkit."""


class ObbkitError(Exception):
    """Base class for all obbkit errors."""


class NonFiniteInput(ObbkitError):
    """An input field is NaN or infinite."""


class DegenerateInput(ObbkitError):
    """Geometric input carries no usable extent (e.g. an empty point set)."""


class NotPSD(ObbkitError):
    """A covariance matrix has an eigenvalue below the PSD tolerance."""


class NotPD(ObbkitError):
    """A covariance matrix is singular where strict positive-definiteness is required."""


class InvalidGeometry(ObbkitError):
    """Geometric parameters are inconsistent (e.g. split gap >= window)."""


class MixedImageOrCategory(ObbkitError):
    """Records passed to a per-image, per-category operation are not homogeneous."""


class UnknownCategory(ObbkitError):
    """A record names a category outside the declared category list."""


class ParseError(ObbkitError):
    """A text input failed to parse; carries the offending location."""

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        loc = ""
        if source is not None:
            loc += f"{source}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.source = source
        self.line = line
