"""Tokenization statistics and old-vs-new drift reporting.

Quantifies how a tokenizer behaves on a corpus (fertility, unknown rate,
vocabulary coverage) and how two tokenizers of the same corpus diverge. Words
are maximal non-whitespace runs, the same pre-tokenization the trainer uses.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .errors import EmptyCorpusError, VocabularyError
from .subwords import LongestMatchEncoder, MergeRule, SubwordEncoder, iter_words
from .transfer import build_transfer_plan, plan_summary
from .vocab import Vocabulary

CorpusSource = Union[str, os.PathLike, Iterable[str]]


@dataclass
class CorpusStats:
    """Aggregate token counts for one (corpus, tokenizer) pair.

    ``token_frequency`` excludes unknown occurrences, which are tallied in
    ``unknown_count``; the unknown id still counts as a used token for
    coverage purposes when it occurs.
    """

    word_count: int
    token_count: int
    unknown_count: int
    token_frequency: dict[int, int]
    vocab_size: int

    @property
    def fertility(self) -> float:
        return self.token_count / self.word_count if self.word_count else 0.0

    @property
    def unknown_rate(self) -> float:
        return self.unknown_count / self.token_count if self.token_count else 0.0

    @property
    def coverage(self) -> float:
        used = len(self.token_frequency) + (1 if self.unknown_count else 0)
        return used / self.vocab_size

    def combine(self, other: "CorpusStats") -> "CorpusStats":
        """Deterministic merge of shard counts (same tokenizer required)."""
        if self.vocab_size != other.vocab_size:
            raise ValueError("cannot combine stats from different vocabularies")
        freq = dict(self.token_frequency)
        for token_id, count in other.token_frequency.items():
            freq[token_id] = freq.get(token_id, 0) + count
        return CorpusStats(
            word_count=self.word_count + other.word_count,
            token_count=self.token_count + other.token_count,
            unknown_count=self.unknown_count + other.unknown_count,
            token_frequency=freq,
            vocab_size=self.vocab_size,
        )


def _make_encoder(vocab: Vocabulary, merges: Optional[Sequence[MergeRule]]):
    if merges is None:
        return LongestMatchEncoder(vocab)
    return SubwordEncoder(vocab, merges)


def tokenize_corpus(
    corpus: Iterable[str],
    vocab: Vocabulary,
    merges: Optional[Sequence[MergeRule]] = None,
) -> CorpusStats:
    """Stream the corpus once and count words, tokens, and unknowns.

    With ``merges`` the ranked-merge encoder is used; without, greedy
    longest-match against the vocabulary (for merge-less vocab files).
    """
    if vocab.unknown_id is None:
        raise VocabularyError("vocabulary has no [UNK] token; cannot tokenize")
    encoder = _make_encoder(vocab, merges)
    unk = vocab.unknown_id
    word_count = 0
    token_count = 0
    unknown_count = 0
    frequency: dict[int, int] = {}
    for word in iter_words(corpus):
        word_count += 1
        ids = encoder.encode_word(word)
        token_count += len(ids)
        for token_id in ids:
            if token_id == unk:
                unknown_count += 1
            else:
                frequency[token_id] = frequency.get(token_id, 0) + 1
    if word_count == 0:
        raise EmptyCorpusError("corpus yielded no words after pre-tokenization")
    return CorpusStats(
        word_count=word_count,
        token_count=token_count,
        unknown_count=unknown_count,
        token_frequency=frequency,
        vocab_size=len(vocab),
    )


@dataclass
class DriftReport:
    old_fertility: float
    new_fertility: float
    ratio: float
    unknown_rate_old: float
    unknown_rate_new: float
    top_gainers: list[dict]
    transfer_counts: dict[str, int]
    warnings: list[str] = field(default_factory=list)


def _corpus_lines(corpus: CorpusSource) -> list[str]:
    if isinstance(corpus, (str, os.PathLike)):
        with open(corpus, "r", encoding="utf-8") as f:
            return f.read().split("\n")
    return list(corpus)


def compare_vocabularies(
    corpus: CorpusSource,
    old_vocab: Vocabulary,
    new_vocab: Vocabulary,
    old_merges: Optional[Sequence[MergeRule]] = None,
    new_merges: Optional[Sequence[MergeRule]] = None,
    top_k: int = 20,
) -> DriftReport:
    """Tokenize the corpus under both vocabularies and report the drift.

    Fertility ordering is reported, never asserted. ``top_gainers`` ranks
    new-vocabulary tokens by count gain over the same surface under the old
    tokenizer (ties by new token id). ``transfer_counts`` states how many new
    tokens would match / average / fall back against the old vocabulary.
    """
    lines = _corpus_lines(corpus)
    old_stats = tokenize_corpus(lines, old_vocab, old_merges)
    new_stats = tokenize_corpus(lines, new_vocab, new_merges)

    old_by_surface = {
        old_vocab.surface(token_id): count
        for token_id, count in old_stats.token_frequency.items()
    }
    gains = []
    for token_id, count in new_stats.token_frequency.items():
        surface = new_vocab.surface(token_id)
        old_count = old_by_surface.get(surface, 0)
        gains.append((count - old_count, token_id, surface, old_count, count))
    gains.sort(key=lambda g: (-g[0], g[1]))
    top_gainers = [
        {"token": surface, "old_count": old_count, "new_count": new_count}
        for _, _, surface, old_count, new_count in gains[:top_k]
    ]

    summary = plan_summary(build_transfer_plan(new_vocab, old_vocab, "averaged"))
    notes = []
    if new_stats.unknown_rate == 1.0:
        notes.append("new tokenizer produced only unknown tokens on this corpus")
    if old_stats.unknown_rate == 1.0:
        notes.append("old tokenizer produced only unknown tokens on this corpus")

    return DriftReport(
        old_fertility=old_stats.fertility,
        new_fertility=new_stats.fertility,
        ratio=new_stats.fertility / old_stats.fertility,
        unknown_rate_old=old_stats.unknown_rate,
        unknown_rate_new=new_stats.unknown_rate,
        top_gainers=top_gainers,
        transfer_counts={
            "matched": summary.matched,
            "averaged": summary.averaged,
            "fallback": summary.fallback,
        },
        warnings=notes,
    )


def report_to_bytes(report: DriftReport) -> bytes:
    doc = {
        "old_fertility": report.old_fertility,
        "new_fertility": report.new_fertility,
        "ratio": report.ratio,
        "unknown_rate_old": report.unknown_rate_old,
        "unknown_rate_new": report.unknown_rate_new,
        "top_gainers": report.top_gainers,
        "transfer_counts": report.transfer_counts,
        "warnings": report.warnings,
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def save_report(report: DriftReport, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(report_to_bytes(report))
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc}") from exc
