"""Scikit-learn style wrappers so training and transfer compose with pipelines.

``SubwordTokenizer`` is CountVectorizer-shaped: fit learns a vocabulary from
raw documents, transform maps documents to token-id lists. ``VocabularyTransfer``
fits on an (old, new) vocabulary pair and transforms an old embedding matrix
into the initialized new one. Both inherit ``get_params``/``set_params`` from
``sklearn.base.BaseEstimator``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .embeddings import EmbeddingMatrix, FallbackStrategy, apply_transfer
from .subwords import DEFAULT_SPECIALS, SubwordEncoder, TrainerConfig, train_vocabulary
from .transfer import build_transfer_plan, plan_summary
from .validation import check_documents, check_embedding_array, check_vocabulary
from .vocab import DEFAULT_MARKER


class SubwordTokenizer(BaseEstimator, TransformerMixin):
    """Learn a corpus-specific subword vocabulary and encode documents with it.

    Attributes after fit: ``vocab_`` (the Vocabulary), ``merges_`` (ranked
    merge rules), ``encoder_`` (cached word encoder).
    """

    def __init__(
        self,
        target_size: int = 8000,
        marker: str = DEFAULT_MARKER,
        specials: tuple = DEFAULT_SPECIALS,
        min_pair_frequency: int = 2,
        max_token_length: int = 64,
        lowercase: bool = False,
    ):
        self.target_size = target_size
        self.marker = marker
        self.specials = specials
        self.min_pair_frequency = min_pair_frequency
        self.max_token_length = max_token_length
        self.lowercase = lowercase

    def fit(self, X, y=None):
        docs = check_documents(X)
        config = TrainerConfig(
            target_size=self.target_size,
            marker=self.marker,
            specials=tuple(self.specials),
            min_pair_frequency=self.min_pair_frequency,
            max_token_length=self.max_token_length,
            lowercase=self.lowercase,
        )
        self.vocab_, self.merges_ = train_vocabulary(docs, config)
        self.encoder_ = SubwordEncoder(self.vocab_, self.merges_)
        return self

    def transform(self, X) -> list[list[int]]:
        if not hasattr(self, "encoder_"):
            raise AttributeError("SubwordTokenizer is not fitted yet; call fit first")
        docs = check_documents(X)
        encoded = []
        for doc in docs:
            ids: list[int] = []
            for word in doc.split():
                if self.lowercase:
                    word = word.lower()
                ids.extend(self.encoder_.encode_word(word))
            encoded.append(ids)
        return encoded


class VocabularyTransfer(BaseEstimator, TransformerMixin):
    """Plan and apply old-to-new embedding initialization.

    ``fit(old_vocab, new_vocab)`` computes the transfer plan; ``transform``
    maps an old (rows, dim) matrix to the initialized new one. Attributes
    after fit: ``plan_``, ``summary_``.
    """

    def __init__(
        self,
        mode: str = "averaged",
        fallback: str = "global_mean",
        seed: Optional[int] = None,
        scale: Optional[float] = None,
    ):
        self.mode = mode
        self.fallback = fallback
        self.seed = seed
        self.scale = scale

    def fit(self, old_vocab, new_vocab):
        check_vocabulary(old_vocab, "old_vocab")
        check_vocabulary(new_vocab, "new_vocab")
        self.old_size_ = len(old_vocab)
        self.plan_ = build_transfer_plan(new_vocab, old_vocab, self.mode)
        self.summary_ = plan_summary(self.plan_)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "plan_"):
            raise AttributeError("VocabularyTransfer is not fitted yet; call fit first")
        arr = check_embedding_array(X, self.old_size_)
        strategy = FallbackStrategy(kind=self.fallback, seed=self.seed, scale=self.scale)
        new_matrix = apply_transfer(self.plan_, EmbeddingMatrix(arr), strategy)
        return new_matrix.data
