"""Exception hierarchy shared across the toolkit.

Every failure mode raised by the library is a subclass of ``NcCoresetError``
so callers (and the CLI) can map errors to exit codes without matching on
message strings.
"""


class NcCoresetError(Exception):
    """Base class for all toolkit errors."""


# --- file formats -----------------------------------------------------------

class IoFailure(NcCoresetError):
    pass


class BadMagic(NcCoresetError):
    pass


class VersionMismatch(NcCoresetError):
    pass


class TruncatedFile(NcCoresetError):
    pass


class DimensionMismatch(NcCoresetError):
    pass


class NonFiniteValue(NcCoresetError):
    pass


class DuplicateSampleId(NcCoresetError):
    pass


class InvariantViolation(NcCoresetError):
    pass


class MalformedRow(NcCoresetError):
    pass


class UnknownLabelToken(NcCoresetError):
    pass


# --- geometry / sampling ----------------------------------------------------

class EmptyClass(NcCoresetError):
    pass


class DegenerateGeometry(NcCoresetError):
    pass


class MissingScore(NcCoresetError):
    pass


class CountExceedsClass(NcCoresetError):
    pass


# --- clustering -------------------------------------------------------------

class KTooLarge(NcCoresetError):
    pass


class EmptyInput(NcCoresetError):
    pass


class SingleCluster(NcCoresetError):
    pass


class EmptyCluster(NcCoresetError):
    pass


# --- metrics ----------------------------------------------------------------

class SingleClassOnly(NcCoresetError):
    pass


# --- audio front-end --------------------------------------------------------

class UnsupportedFormat(NcCoresetError):
    pass


class CorruptFile(NcCoresetError):
    pass


class EmptyClip(NcCoresetError):
    pass


class ClipTooShort(NcCoresetError):
    pass


class NegativePower(NcCoresetError):
    pass


class ShapeMismatch(NcCoresetError):
    pass


# --- toy model --------------------------------------------------------------

class InvalidConfig(NcCoresetError):
    pass


class DivergenceDetected(NcCoresetError):
    pass
