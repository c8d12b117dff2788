"""Estimator wrappers: sklearn API conformance and equivalence with the core."""

import numpy as np
import pytest
from sklearn.base import clone

from vocabtransfer import (
    EmbeddingMatrix,
    FallbackStrategy,
    SubwordTokenizer,
    TrainerConfig,
    VocabularyTransfer,
    apply_transfer,
    build_transfer_plan,
    train_vocabulary,
)

DOCS = ["abab abab cd", "abab cd cd", "dcba abab"]


def test_tokenizer_fit_transform_round_trip():
    tok = SubwordTokenizer(target_size=30, specials=("[UNK]",), min_pair_frequency=1)
    encoded = tok.fit(DOCS).transform(DOCS)
    assert len(encoded) == len(DOCS)
    for doc, ids in zip(DOCS, encoded):
        rebuilt = []
        word = ""
        for token_id in ids:
            piece = tok.vocab_.normalized(token_id)
            if tok.vocab_.is_continuation(token_id):
                word += piece
            else:
                if word:
                    rebuilt.append(word)
                word = piece
        rebuilt.append(word)
        assert rebuilt == doc.split()


def test_tokenizer_matches_functional_core():
    tok = SubwordTokenizer(target_size=25, specials=("[UNK]",), min_pair_frequency=1)
    tok.fit(DOCS)
    config = TrainerConfig(
        target_size=25, specials=("[UNK]",), min_pair_frequency=1
    )
    vocab, merges = train_vocabulary(DOCS, config)
    assert tok.vocab_.to_bytes() == vocab.to_bytes()
    assert tok.merges_ == merges


def test_tokenizer_get_params_and_clone():
    tok = SubwordTokenizer(target_size=123, lowercase=True)
    params = tok.get_params()
    assert params["target_size"] == 123
    assert params["lowercase"] is True
    cloned = clone(tok)
    assert cloned.get_params() == params


def test_tokenizer_rejects_single_string():
    tok = SubwordTokenizer()
    with pytest.raises(TypeError, match="iterable of documents"):
        tok.fit("just one string")


def test_tokenizer_unfitted_transform_raises():
    with pytest.raises(AttributeError, match="not fitted"):
        SubwordTokenizer().transform(DOCS)


def _fitted_pair():
    old_tok = SubwordTokenizer(target_size=20, specials=("[UNK]",), min_pair_frequency=1)
    old_tok.fit(["abab cd cd", "ab ab"])
    new_tok = SubwordTokenizer(target_size=30, specials=("[UNK]",), min_pair_frequency=1)
    new_tok.fit(DOCS)
    return old_tok.vocab_, new_tok.vocab_


def test_transfer_estimator_matches_functional_core():
    old_vocab, new_vocab = _fitted_pair()
    rng = np.random.default_rng(7)
    old_matrix = rng.standard_normal((len(old_vocab), 8)).astype(np.float32)

    est = VocabularyTransfer(mode="averaged", fallback="random_normal", seed=3)
    result = est.fit(old_vocab, new_vocab).transform(old_matrix)

    plan = build_transfer_plan(new_vocab, old_vocab, "averaged")
    expected = apply_transfer(
        plan,
        EmbeddingMatrix(old_matrix),
        FallbackStrategy(kind="random_normal", seed=3),
    )
    assert np.array_equal(result, expected.data)
    assert est.summary_.matched + est.summary_.averaged + est.summary_.fallback == len(
        new_vocab
    )


def test_transfer_estimator_validates_rows():
    old_vocab, new_vocab = _fitted_pair()
    est = VocabularyTransfer().fit(old_vocab, new_vocab)
    wrong = np.zeros((len(old_vocab) + 1, 4), dtype=np.float32)
    with pytest.raises(ValueError, match="rows"):
        est.transform(wrong)


def test_transfer_estimator_params_round_trip():
    est = VocabularyTransfer(mode="matched", fallback="zero", seed=11, scale=0.5)
    assert est.get_params() == {
        "mode": "matched",
        "fallback": "zero",
        "seed": 11,
        "scale": 0.5,
    }
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_transfer_estimator_unfitted_raises():
    with pytest.raises(AttributeError, match="not fitted"):
        VocabularyTransfer().transform(np.zeros((2, 2)))
