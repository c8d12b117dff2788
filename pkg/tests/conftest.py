"""Shared fixtures: deterministic corpora and a pretrained old side at scale."""

import warnings

import numpy as np
import pytest

from corpusgen import write_corpus
from vocabtransfer import (
    EmbeddingMatrix,
    TrainerConfig,
    save_matrix,
    save_merges,
    train_vocabulary,
)


@pytest.fixture(scope="session")
def acceptance_workspace(tmp_path_factory):
    """~1 MB downstream corpus plus an old vocabulary pretrained elsewhere."""
    root = tmp_path_factory.mktemp("acceptance")
    write_corpus(root / "downstream.txt", seed=1234, target_bytes=1_000_000)
    write_corpus(root / "generic.txt", seed=999, target_bytes=400_000)

    generic_lines = (root / "generic.txt").read_text(encoding="utf-8").split("\n")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        old_vocab, old_merges = train_vocabulary(
            generic_lines, TrainerConfig(target_size=8000)
        )
    old_vocab.save(root / "old_vocab.txt")
    save_merges(old_merges, root / "old_merges.txt")

    rng = np.random.default_rng(0)
    old_matrix = EmbeddingMatrix(
        (rng.standard_normal((len(old_vocab), 48)) * 0.02).astype(np.float32)
    )
    save_matrix(old_matrix, root / "old.vtem")
    return {
        "root": root,
        "corpus": root / "downstream.txt",
        "old_vocab_path": root / "old_vocab.txt",
        "old_merges_path": root / "old_merges.txt",
        "old_matrix_path": root / "old.vtem",
        "old_vocab": old_vocab,
        "old_merges": old_merges,
        "old_matrix": old_matrix,
    }
