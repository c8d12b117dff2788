"""Corpus-specific subword vocabulary training and word-to-id encoding.

Training is frequency-greedy pair merging (BPE) over whitespace-pretokenized
words, with WordPiece-style continuation markers. Pairs are counted on
marker-normalized surfaces, so a pair occurring word-initially and
word-internally pools into one frequency; each accepted merge contributes the
word-initial and/or continuation surface variant actually observed in the
merged corpus. Training is deterministic: equal corpus bytes and config give
byte-identical vocabularies, with equal-frequency ties broken by lexicographic
order of the (left, right) pair.

Encoding replays merges lowest-rank-first. A merge application is skipped when
the merged surface variant is missing from the vocabulary (possible when the
target-size budget cut a variant), which keeps fully character-covered words
reconstructable without [UNK].
"""

from __future__ import annotations

import heapq
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import EmptyCorpusError, MergeRuleError, VocabularyError
from .vocab import DEFAULT_MARKER, Vocabulary, split_marker

DEFAULT_SPECIALS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")


@dataclass(frozen=True)
class MergeRule:
    """One ranked pair merge; surfaces are stored as written in merges files.

    ``left`` is the bare (word-initial) spelling, ``right`` carries the
    continuation marker; ``result`` is their marker-normalized concatenation.
    """

    left: str
    right: str
    result: str
    rank: int


@dataclass
class TrainerConfig:
    target_size: int
    marker: str = DEFAULT_MARKER
    specials: Sequence[str] = DEFAULT_SPECIALS
    min_pair_frequency: int = 2
    max_token_length: int = 64
    lowercase: bool = False

    def validate(self) -> None:
        if not self.marker:
            raise VocabularyError("continuation marker must be non-empty")
        if self.target_size < len(self.specials) + 1:
            raise VocabularyError(
                f"target_size {self.target_size} leaves no room for a "
                f"non-special token ({len(self.specials)} specials)"
            )
        if self.max_token_length < 2:
            raise VocabularyError("max_token_length must be at least 2")
        if self.min_pair_frequency < 1:
            raise VocabularyError("min_pair_frequency must be at least 1")


def iter_words(lines: Iterable[str], lowercase: bool = False):
    """Split a line stream into words (maximal non-whitespace runs)."""
    for line in lines:
        if lowercase:
            line = line.lower()
        yield from line.split()


def _usable(norm: str, marker: str) -> bool:
    # A normalized piece is storable in both namespaces only when it does not
    # itself begin with the marker (else the surface would be misread on load).
    return bool(norm) and not norm.startswith(marker)


def train_vocabulary(
    corpus: Iterable[str], config: TrainerConfig
) -> tuple[Vocabulary, list[MergeRule]]:
    """Learn a vocabulary of min(target_size, reachable size) tokens.

    Layout: specials first, then the base alphabet (word-initial and
    continuation character variants observed in the corpus, ordered by
    character then variant), then merge-result variants in rank order.
    """
    tokens, merges, _ = _train(corpus, config)
    vocab = Vocabulary(
        tokens, marker=config.marker, specials=range(len(config.specials))
    )
    return vocab, merges


def train_vocabulary_sweep(
    corpus: Iterable[str], config: TrainerConfig, sizes: Sequence[int]
) -> list[tuple[Vocabulary, list[MergeRule]]]:
    """Train once at max(sizes) and slice prefixes for the smaller targets.

    Ranked merges grow a vocabulary monotonically, so the result is
    byte-identical to training each size separately (config.target_size is
    ignored in favor of max(sizes)).
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    full_config = TrainerConfig(
        target_size=max(sizes),
        marker=config.marker,
        specials=config.specials,
        min_pair_frequency=config.min_pair_frequency,
        max_token_length=config.max_token_length,
        lowercase=config.lowercase,
    )
    tokens, merges, sizes_before = _train(corpus, full_config)
    out = []
    for size in sizes:
        sliced_merges = [
            rule for rule, before in zip(merges, sizes_before) if before < size
        ]
        vocab = Vocabulary(
            tokens[:size], marker=config.marker, specials=range(len(config.specials))
        )
        out.append((vocab, sliced_merges))
    return out


def _train(
    corpus: Iterable[str], config: TrainerConfig
) -> tuple[list[str], list[MergeRule], list[int]]:
    """Core trainer; returns (token surfaces, merges, vocab size before each merge)."""
    config.validate()
    marker = config.marker

    word_freqs = Counter(iter_words(corpus, config.lowercase))
    if not word_freqs:
        raise EmptyCorpusError("corpus yielded no words after pre-tokenization")

    words: list[list[str]] = []
    freqs: list[int] = []
    for word, freq in word_freqs.items():
        words.append(list(word))
        freqs.append(freq)

    initial_chars: set[str] = set()
    cont_chars: set[str] = set()
    for symbols in words:
        initial_chars.add(symbols[0])
        cont_chars.update(symbols[1:])

    tokens: list[str] = list(config.specials)
    seen = set(tokens)
    if len(seen) != len(tokens):
        raise VocabularyError("duplicate special token surfaces")

    alphabet: list[str] = []
    for ch in sorted(initial_chars | cont_chars):
        if not _usable(ch, marker):
            continue
        if ch in initial_chars:
            alphabet.append(ch)
        if ch in cont_chars:
            alphabet.append(marker + ch)
    for surface in alphabet:
        if len(tokens) >= config.target_size:
            warnings.warn(
                f"target_size {config.target_size} is below specials + base "
                f"alphabet ({len(config.specials)} + {len(alphabet)}); "
                "alphabet truncated",
                RuntimeWarning,
                stacklevel=2,
            )
            break
        if surface not in seen:
            tokens.append(surface)
            seen.add(surface)

    pair_counts: Counter = Counter()
    pair_where: dict[tuple[str, str], set[int]] = {}
    for wi, symbols in enumerate(words):
        freq = freqs[wi]
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freq
            pair_where.setdefault(pair, set()).add(wi)

    heap = [(-count, left, right) for (left, right), count in pair_counts.items()]
    heapq.heapify(heap)

    merges: list[MergeRule] = []
    sizes_before: list[int] = []
    retired: set[tuple[str, str]] = set()  # merged or rejected pairs

    while len(tokens) < config.target_size:
        pair = None
        while heap:
            neg, left, right = heapq.heappop(heap)
            cand = (left, right)
            if cand in retired or pair_counts.get(cand, 0) != -neg:
                continue  # stale entry
            pair = cand
            count = -neg
            break
        if pair is None or count < config.min_pair_frequency:
            warnings.warn(
                f"target_size {config.target_size} unreachable: stopped at "
                f"{len(tokens)} tokens after {len(merges)} merges",
                RuntimeWarning,
                stacklevel=2,
            )
            break

        left, right = pair
        result = left + right
        if len(result) > config.max_token_length or not _usable(result, marker):
            retired.add(pair)
            continue

        init_seen = False
        cont_seen = False
        for wi in sorted(pair_where.pop(pair, ())):
            symbols = words[wi]
            freq = freqs[wi]
            old_pairs = Counter(zip(symbols, symbols[1:]))
            new_symbols: list[str] = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and symbols[i] == left
                    and symbols[i + 1] == right
                ):
                    if new_symbols:
                        cont_seen = True
                    else:
                        init_seen = True
                    new_symbols.append(result)
                    i += 2
                else:
                    new_symbols.append(symbols[i])
                    i += 1
            words[wi] = new_symbols
            new_pairs = Counter(zip(new_symbols, new_symbols[1:]))
            for p in old_pairs.keys() | new_pairs.keys():
                delta = new_pairs[p] - old_pairs[p]
                if delta:
                    updated = pair_counts[p] + delta * freq
                    if updated:
                        pair_counts[p] = updated
                        if p not in retired:
                            heapq.heappush(heap, (-updated, p[0], p[1]))
                    else:
                        del pair_counts[p]
                if new_pairs[p]:
                    pair_where.setdefault(p, set()).add(wi)
                else:
                    loc = pair_where.get(p)
                    if loc is not None:
                        loc.discard(wi)
        retired.add(pair)
        pair_counts.pop(pair, None)

        sizes_before.append(len(tokens))
        merges.append(
            MergeRule(left=left, right=marker + right, result=result, rank=len(merges))
        )
        variants = []
        if init_seen:
            variants.append(result)
        if cont_seen:
            variants.append(marker + result)
        for surface in variants:
            if len(tokens) >= config.target_size:
                break
            if surface not in seen:
                tokens.append(surface)
                seen.add(surface)

    return tokens, merges, sizes_before


def merges_to_bytes(merges: Sequence[MergeRule]) -> bytes:
    return "".join(f"{rule.left} {rule.right}\n" for rule in merges).encode("utf-8")


def save_merges(merges: Sequence[MergeRule], path) -> None:
    """Write one "left right" rule per line; rank is the line index."""
    try:
        with open(path, "wb") as f:
            f.write(merges_to_bytes(merges))
    except OSError as exc:
        raise OSError(f"cannot write merges file {path}: {exc}") from exc


def load_merges(path, marker: str = DEFAULT_MARKER) -> list[MergeRule]:
    try:
        with open(path, "rb") as f:
            text = f.read().decode("utf-8")
    except OSError as exc:
        raise OSError(f"cannot read merges file {path}: {exc}") from exc
    merges = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise MergeRuleError(
                f"{path}: line {lineno}: expected 'left right', got {line!r}"
            )
        left, right = parts
        right_norm, right_cont = split_marker(right, marker)
        if not right_cont:
            raise MergeRuleError(
                f"{path}: line {lineno}: right side {right!r} must carry the "
                f"continuation marker {marker!r}"
            )
        merges.append(
            MergeRule(left=left, right=right, result=left + right_norm, rank=lineno - 1)
        )
    return merges


class SubwordEncoder:
    """Replays ranked merges on words and maps the pieces to token ids.

    Merge applications are guarded on the merged surface variant existing in
    the vocabulary; occurrences whose variant is missing stay split. Results
    are cached per word, so one encoder instance amortizes across a corpus.
    """

    def __init__(self, vocab: Vocabulary, merges: Sequence[MergeRule]):
        self.vocab = vocab
        self.marker = vocab.marker
        self._ranks: dict[tuple[str, str], int] = {}
        for rule in merges:
            right_norm, _ = split_marker(rule.right, self.marker)
            self._ranks.setdefault((rule.left, right_norm), rule.rank)
        self._cache: dict[str, tuple[int, ...]] = {}

    def _pieces(self, word: str) -> list[str]:
        symbols = list(word)
        ranks = self._ranks
        vocab = self.vocab
        marker = self.marker
        blocked: set[tuple[tuple[str, str], bool]] = set()
        while len(symbols) > 1:
            best_rank = None
            best_pair = None
            for i in range(len(symbols) - 1):
                pair = (symbols[i], symbols[i + 1])
                rank = ranks.get(pair)
                if rank is None or (pair, i == 0) in blocked:
                    continue
                if best_rank is None or rank < best_rank:
                    best_rank = rank
                    best_pair = pair
            if best_pair is None:
                break
            left, right = best_pair
            merged = left + right
            new_symbols: list[str] = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and symbols[i] == left
                    and symbols[i + 1] == right
                ):
                    at_start = not new_symbols
                    surface = merged if at_start else marker + merged
                    if surface in vocab:
                        new_symbols.append(merged)
                        i += 2
                    else:
                        blocked.add((best_pair, at_start))
                        new_symbols.append(symbols[i])
                        i += 1
                else:
                    new_symbols.append(symbols[i])
                    i += 1
            symbols = new_symbols
        return symbols

    def encode_word(self, word: str) -> list[int]:
        if not word or word.split() != [word]:
            raise ValueError(f"expected a non-empty whitespace-free word: {word!r}")
        cached = self._cache.get(word)
        if cached is None:
            ids = []
            for pos, norm in enumerate(self._pieces(word)):
                surface = norm if pos == 0 else self.marker + norm
                token_id = self.vocab.id_of(surface)
                if token_id is None:
                    token_id = self.vocab.unknown_id
                    if token_id is None:
                        raise VocabularyError(
                            "vocabulary has no [UNK] token; cannot encode "
                            f"uncovered piece {surface!r}"
                        )
                ids.append(token_id)
            cached = tuple(ids)
            self._cache[word] = cached
        return list(cached)


class LongestMatchEncoder:
    """Greedy longest-match (WordPiece-style) encoding for merge-less vocabularies.

    Repeatedly takes the longest token matching at the current position; when
    no token matches, the whole word degrades to the unknown id.
    """

    def __init__(self, vocab: Vocabulary):
        from .vocab import TokenTrie

        self.vocab = vocab
        self._trie = TokenTrie(vocab)
        self._cache: dict[str, tuple[int, ...]] = {}

    def encode_word(self, word: str) -> list[int]:
        if not word or word.split() != [word]:
            raise ValueError(f"expected a non-empty whitespace-free word: {word!r}")
        cached = self._cache.get(word)
        if cached is None:
            ids: list[int] = []
            pos = 0
            while pos < len(word):
                hit = self._trie.longest_match(word, pos, is_continuation=pos > 0)
                if hit is None:
                    unk = self.vocab.unknown_id
                    if unk is None:
                        raise VocabularyError(
                            "vocabulary has no [UNK] token; cannot encode "
                            f"uncovered word {word!r}"
                        )
                    ids = [unk]
                    break
                pos, token_id = hit
                ids.append(token_id)
            cached = tuple(ids)
            self._cache[word] = cached
        return list(cached)


def apply_merges(
    word: str, merges: Sequence[MergeRule], vocab: Vocabulary
) -> list[int]:
    """Encode one word; see SubwordEncoder for the bulk interface."""
    return SubwordEncoder(vocab, merges).encode_word(word)
