"""Exception hierarchy shared across the toolkit."""


class ZleakError(Exception):
    """Base class for all toolkit errors."""


class NumericDomainError(ZleakError):
    """A computation left its numeric domain (overflow, underflow, singularity)."""


class OpenCircuitError(ZleakError):
    """S11 = 1 maps to infinite impedance; callers must handle it explicitly."""


class DegenerateInputError(ZleakError):
    """An input is at a degenerate point where the operation is undefined."""


class ShapeError(ZleakError):
    """Two objects that must share a grid or shape do not."""


class ConfigurationError(ZleakError):
    """A configuration or schedule is internally inconsistent."""


class NoWitnessError(ZleakError):
    """No frequency distinguishes the two states of the requested bit."""


class InsufficientDataError(ZleakError):
    """A profiling class has too few traces to be characterized."""


class IncompleteRecoveryError(ZleakError):
    """Key assembly was requested with bit decisions missing."""


class ArchiveError(ZleakError):
    """Base for trace-archive format errors."""


class ArchiveVersionError(ArchiveError):
    """The archive declares an unsupported schema version."""


class ArchiveShapeError(ArchiveError):
    """Header-declared shape disagrees with the payload."""


class ArchiveTruncatedError(ArchiveError):
    """The payload ends before the header-declared size."""


class TouchstoneError(ZleakError):
    """Base for Touchstone parse errors."""


class MissingOptionLineError(TouchstoneError):
    """No option line ('# ...') precedes the data rows."""


class NonMonotoneFrequencyError(TouchstoneError):
    """Frequencies are not strictly increasing."""


class WrongPortCountError(TouchstoneError):
    """The file is not a one-port sweep."""
