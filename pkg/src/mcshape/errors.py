"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class MCShapeError(Exception):
    """Base class for all errors raised by mcshape."""


class DegenerateShapeError(MCShapeError, ValueError):
    """A shape (or component) has zero or negative area."""


class NoComponentsError(DegenerateShapeError):
    """A label image carries no foreground labels."""


class OverlappingComponentsError(DegenerateShapeError):
    """Two components of a multi-component shape share a positive area."""


class SingularMapError(MCShapeError, ValueError):
    """An affine map with (numerically) zero determinant."""


class DegenerateHistogramError(MCShapeError, ValueError):
    """Too few populated histogram bins for the requested number of classes."""


class ImageFormatError(MCShapeError, ValueError):
    """Malformed or unsupported image file."""
