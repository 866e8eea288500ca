"""Exception hierarchy shared across the library.

Everything raised on purpose derives from OpfdistError, so callers can
catch one type at the boundary.  Plain OSError is allowed to propagate
from file operations; ValueError is reserved for malformed arguments
(bad alpha, runs < 1, and similar).
"""


class OpfdistError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(OpfdistError):
    """Two feature vectors (or a vector and a model) disagree on length."""


class DomainViolation(OpfdistError):
    """Strict-mode evaluation saw input outside a measure's domain."""


class SingleClass(OpfdistError):
    """A training set contains fewer than two distinct labels."""


class EmptyInput(OpfdistError):
    """An operation that needs at least one element received none."""


class LengthMismatch(OpfdistError):
    """Two paired sequences have different lengths."""


class TooFewSamplesPerClass(OpfdistError):
    """Stratified splitting needs at least two samples of every class."""


class TooFewPairs(OpfdistError):
    """The signed-rank test needs at least five paired observations."""


class TooFewClassifiers(OpfdistError):
    """Rank statistics need at least three classifiers."""


class MissingCells(OpfdistError):
    """A benchmark matrix lacks cells required by the requested statistic."""


class DataFormatError(OpfdistError):
    """A file exists but its contents cannot be used.

    ``path``, ``row`` and ``column`` are 1-based and optional; they are
    folded into the message when given.
    """

    def __init__(self, message, *, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ParseError(DataFormatError):
    """A token or line in a dataset file could not be parsed."""


class EmptyFile(DataFormatError):
    """A dataset file contains no data rows."""


class RaggedRows(ParseError):
    """Rows of a delimited file disagree on the number of fields."""


class NonNumericFeature(ParseError):
    """A feature field did not parse as a number."""


class NonAscendingIndices(ParseError):
    """Sparse feature indices on a line are not strictly increasing."""


class ArchiveError(OpfdistError):
    """A model archive cannot be read."""


class VersionMismatch(ArchiveError):
    """The archive was written by an unsupported format version."""


class CorruptArchive(ArchiveError):
    """The archive is truncated, mislabeled, or fails its checksum."""


class ConfigError(OpfdistError):
    """A benchmark configuration file is invalid."""
