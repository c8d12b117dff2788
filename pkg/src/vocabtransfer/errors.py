"""Exception types shared across the package."""


class VocabTransferError(Exception):
    """Base class for every error this package raises on purpose."""


class VocabularyError(VocabTransferError):
    """Invalid vocabulary content or vocabulary file."""


class MergeRuleError(VocabTransferError):
    """Invalid merge rule list or merges file."""


class EmptyCorpusError(VocabTransferError):
    """The corpus yielded no words after pre-tokenization."""


class PlanError(VocabTransferError):
    """Invalid transfer plan content or plan/vocabulary mismatch."""


class DigestMismatchError(PlanError):
    """Plan provenance digest does not match the supplied artifact."""


class MatrixFormatError(VocabTransferError):
    """Base class for embedding matrix file errors."""


class BadMagicError(MatrixFormatError):
    """Matrix file does not start with the expected magic bytes."""


class BadVersionError(MatrixFormatError):
    """Matrix file declares an unsupported format version."""


class SizeMismatchError(MatrixFormatError):
    """Matrix payload size disagrees with the header, or shape is invalid."""


class NonFiniteError(MatrixFormatError):
    """Matrix contains NaN or infinite values."""
