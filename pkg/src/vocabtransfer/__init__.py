"""Corpus-specific subword vocabularies with matched/averaged embedding transfer.

Train a vocabulary on a downstream corpus, plan how each new token maps onto
an existing (pretrained) vocabulary, materialize an initialized embedding
matrix, and report tokenization drift. The ``vocabtransfer`` CLI orchestrates
the whole recipe; the estimator classes expose the two core algorithms in
scikit-learn form.
"""

from .embeddings import (
    EmbeddingMatrix,
    FallbackStrategy,
    apply_transfer,
    load_matrix,
    load_matrix_text,
    save_matrix,
    save_matrix_text,
)
from .errors import (
    BadMagicError,
    BadVersionError,
    DigestMismatchError,
    EmptyCorpusError,
    MatrixFormatError,
    MergeRuleError,
    NonFiniteError,
    PlanError,
    SizeMismatchError,
    VocabTransferError,
    VocabularyError,
)
from .estimators import SubwordTokenizer, VocabularyTransfer
from .stats import (
    CorpusStats,
    DriftReport,
    compare_vocabularies,
    save_report,
    tokenize_corpus,
)
from .subwords import (
    DEFAULT_SPECIALS,
    LongestMatchEncoder,
    MergeRule,
    SubwordEncoder,
    TrainerConfig,
    apply_merges,
    load_merges,
    save_merges,
    train_vocabulary,
)
from .transfer import (
    InitDirective,
    Partition,
    PlanSummary,
    TransferPlan,
    build_transfer_plan,
    load_plan,
    match_tokens,
    min_partition,
    plan_summary,
    save_plan,
)
from .vocab import (
    DEFAULT_MARKER,
    Token,
    TokenTrie,
    Vocabulary,
    build_trie,
    load_vocabulary,
    save_vocabulary,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MARKER",
    "DEFAULT_SPECIALS",
    "BadMagicError",
    "BadVersionError",
    "CorpusStats",
    "DigestMismatchError",
    "DriftReport",
    "EmbeddingMatrix",
    "EmptyCorpusError",
    "FallbackStrategy",
    "InitDirective",
    "LongestMatchEncoder",
    "MatrixFormatError",
    "MergeRule",
    "MergeRuleError",
    "NonFiniteError",
    "Partition",
    "PlanError",
    "PlanSummary",
    "SizeMismatchError",
    "SubwordEncoder",
    "SubwordTokenizer",
    "Token",
    "TokenTrie",
    "TrainerConfig",
    "TransferPlan",
    "VocabTransferError",
    "Vocabulary",
    "VocabularyError",
    "VocabularyTransfer",
    "apply_merges",
    "apply_transfer",
    "build_transfer_plan",
    "build_trie",
    "compare_vocabularies",
    "load_matrix",
    "load_matrix_text",
    "load_merges",
    "load_plan",
    "load_vocabulary",
    "match_tokens",
    "min_partition",
    "plan_summary",
    "save_matrix",
    "save_matrix_text",
    "save_merges",
    "save_plan",
    "save_report",
    "save_vocabulary",
    "tokenize_corpus",
    "train_vocabulary",
]
