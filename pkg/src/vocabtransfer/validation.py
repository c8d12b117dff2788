"""Input validation helpers shared by the estimator layer."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .vocab import Vocabulary


def check_documents(X) -> list[str]:
    """Materialize and validate an iterable of text documents."""
    if isinstance(X, str):
        raise TypeError(
            "expected an iterable of documents, got a single string; "
            "wrap it in a list"
        )
    docs = list(X)
    for i, doc in enumerate(docs):
        if not isinstance(doc, str):
            raise TypeError(f"document {i} is {type(doc).__name__}, expected str")
    return docs


def check_vocabulary(value, name: str) -> Vocabulary:
    if not isinstance(value, Vocabulary):
        raise TypeError(f"{name} must be a Vocabulary, got {type(value).__name__}")
    return value


def check_embedding_array(X, expected_rows: int) -> np.ndarray:
    """Validate a (rows, dim) float array against the fitted old vocabulary."""
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D embedding matrix, got shape {arr.shape}")
    if arr.shape[0] != expected_rows:
        raise ValueError(
            f"matrix has {arr.shape[0]} rows, fitted old vocabulary has "
            f"{expected_rows} tokens"
        )
    return arr
