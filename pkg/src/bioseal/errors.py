"""Exception types raised across the toolkit.

Everything derives from BiosealError so callers (and the CLI) can catch
one base class and map it to a diagnostic + exit code.
"""


class BiosealError(Exception):
    """Base class for all toolkit errors."""


# --- imaging ---------------------------------------------------------------

class UnsupportedFormat(BiosealError):
    """File is not binary PGM (P5, maxval 255) or 8-bit grayscale PNG."""


class CorruptFile(BiosealError):
    """Header/payload structure of an image file is inconsistent."""


class InvalidGrid(BiosealError):
    """Block grid is empty or does not fit the image."""


class OutOfBounds(BiosealError):
    """Pixel coordinate or window falls outside the image."""


# --- feature extraction / watermarking -------------------------------------

class ImageTooSmall(BiosealError):
    """Image below the minimum size for the requested operation."""


class CapacityError(BiosealError):
    """Tile grid cannot host the requested embedding window radius."""


# --- biohashing -------------------------------------------------------------

class InvalidDims(BiosealError):
    """Requested projection dimensions are inconsistent (m > n or m < 1)."""


class RankDeficiency(BiosealError):
    """Too many consecutive degenerate candidates during orthonormalization."""


class LengthMismatch(BiosealError):
    """Bit vectors of different lengths were combined."""


# --- protocol ---------------------------------------------------------------

class InvalidK(BiosealError):
    """Hash-chain index k must be >= 1."""


class LedgerWriteError(BiosealError):
    """Ledger file could not be appended to."""


class NoMarkReadable(BiosealError):
    """Extracted mark is degenerate (constant halves); nothing to verify."""


# --- attacks / evaluation ----------------------------------------------------

class InvalidLevel(BiosealError):
    """Attack parameter outside its documented range."""


class EmptyScores(BiosealError):
    """EER requested on an empty genuine or impostor score list."""


class MissingFixture(BiosealError):
    """Evaluation corpus file or directory is absent."""


class ConfigError(BiosealError):
    """Evaluation/CLI configuration is malformed."""
