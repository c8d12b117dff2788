"""Vocabulary representation, continuation-marker handling, and a prefix-trie index.

A vocabulary is an ordered list of unique token surfaces with dense integer
ids (id = position). Word-internal pieces carry a leading continuation marker
(default ``"##"``, the BERT convention); the marker is configurable but must
be consistent across every structure derived from one vocabulary. The file
format is one surface per line, LF-terminated UTF-8, so standard BERT
``vocab.txt`` files load unmodified.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .errors import VocabularyError

DEFAULT_MARKER = "##"
UNKNOWN_SURFACE = "[UNK]"


@dataclass(frozen=True)
class Token:
    """One vocabulary entry: raw surface plus its word-position role."""

    surface: str
    is_continuation: bool


def split_marker(surface: str, marker: str) -> tuple[str, bool]:
    """Strip at most one leading marker, returning (normalized, is_continuation).

    Rejects surfaces for which the marker convention is ambiguous: the empty
    string, the marker itself, and surfaces still marker-prefixed after one
    strip (e.g. "####x").
    """
    if not marker:
        raise VocabularyError("continuation marker must be non-empty")
    if not surface:
        raise VocabularyError("empty token surface")
    if surface == marker:
        raise VocabularyError(
            f"token surface equals the continuation marker {marker!r}"
        )
    if surface.startswith(marker):
        normalized = surface[len(marker):]
        if normalized.startswith(marker):
            raise VocabularyError(
                f"ambiguous token surface {surface!r}: still marker-prefixed "
                "after stripping one marker"
            )
        return normalized, True
    return surface, False


def _looks_special(surface: str) -> bool:
    # de-facto vocab.txt convention: bracketed names like [UNK], [PAD], [MASK]
    return len(surface) > 2 and surface.startswith("[") and surface.endswith("]")


class Vocabulary:
    """Immutable ordered token list with byte-exact surfaces and dense ids."""

    def __init__(
        self,
        surfaces: Iterable[str],
        marker: str = DEFAULT_MARKER,
        specials: Optional[Iterable[int]] = None,
    ):
        self.marker = marker
        self._surfaces = tuple(surfaces)
        normalized = []
        flags = []
        ids: dict[str, int] = {}
        for i, surface in enumerate(self._surfaces):
            if "\n" in surface:
                raise VocabularyError(f"token surface contains a newline: {surface!r}")
            norm, cont = split_marker(surface, marker)
            if surface in ids:
                raise VocabularyError(
                    f"duplicate token surface {surface!r} (ids {ids[surface]} and {i})"
                )
            ids[surface] = i
            normalized.append(norm)
            flags.append(cont)
        self._normalized = tuple(normalized)
        self._flags = tuple(flags)
        self._ids = ids
        if specials is None:
            self.specials = frozenset(
                i for i, s in enumerate(self._surfaces) if _looks_special(s)
            )
        else:
            self.specials = frozenset(specials)
        for sid in self.specials:
            if not 0 <= sid < len(self._surfaces):
                raise VocabularyError(f"special id {sid} out of range")
        if len(self._surfaces) < len(self.specials) + 1:
            raise VocabularyError(
                "vocabulary must contain at least one non-special token "
                f"(size {len(self._surfaces)}, specials {len(self.specials)})"
            )

    def __len__(self) -> int:
        return len(self._surfaces)

    def __iter__(self) -> Iterator[str]:
        return iter(self._surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._ids

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self._surfaces == other._surfaces
            and self.marker == other.marker
            and self.specials == other.specials
        )

    def __hash__(self):
        return hash((self._surfaces, self.marker, self.specials))

    def surface(self, token_id: int) -> str:
        return self._surfaces[token_id]

    def token(self, token_id: int) -> Token:
        return Token(self._surfaces[token_id], self._flags[token_id])

    def normalized(self, token_id: int) -> str:
        """Surface with the continuation marker stripped."""
        return self._normalized[token_id]

    def is_continuation(self, token_id: int) -> bool:
        return self._flags[token_id]

    def id_of(self, surface: str) -> Optional[int]:
        return self._ids.get(surface)

    @property
    def unknown_id(self) -> Optional[int]:
        return self._ids.get(UNKNOWN_SURFACE)

    def to_bytes(self) -> bytes:
        """Canonical file encoding: one surface per line, LF, UTF-8, no BOM."""
        return "".join(s + "\n" for s in self._surfaces).encode("utf-8")

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path) -> None:
        try:
            with open(path, "wb") as f:
                f.write(self.to_bytes())
        except OSError as exc:
            raise OSError(f"cannot write vocabulary file {path}: {exc}") from exc

    @classmethod
    def load(cls, path, marker: str = DEFAULT_MARKER) -> "Vocabulary":
        try:
            with open(path, "rb") as f:
                raw = f.read()
        except OSError as exc:
            raise OSError(f"cannot read vocabulary file {path}: {exc}") from exc
        if not raw:
            raise VocabularyError(f"empty vocabulary file: {path}")
        text = raw.decode("utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        seen: dict[str, int] = {}
        for lineno, surface in enumerate(lines, start=1):
            if surface in seen:
                raise VocabularyError(
                    f"{path}: duplicate token surface {surface!r} on line {lineno} "
                    f"(first seen on line {seen[surface]})"
                )
            seen[surface] = lineno
        return cls(lines, marker=marker)


def load_vocabulary(path, marker: str = DEFAULT_MARKER) -> Vocabulary:
    """Load a one-token-per-line vocabulary file; ids are line indices."""
    return Vocabulary.load(path, marker=marker)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    """Write the canonical one-token-per-line encoding of ``vocab``."""
    vocab.save(path)


class _TrieNode:
    __slots__ = ("children", "token_id")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.token_id: Optional[int] = None


class TokenTrie:
    """Prefix index over the marker-normalized surfaces of one vocabulary.

    Word-initial and continuation tokens live in separate sub-indices; every
    query names which namespace it addresses. Immutable after construction
    and safe for concurrent reads.
    """

    def __init__(self, vocab: Vocabulary):
        self.vocab = vocab
        self.marker = vocab.marker
        self._roots = (_TrieNode(), _TrieNode())  # [initial, continuation]
        for token_id in range(len(vocab)):
            node = self._roots[vocab.is_continuation(token_id)]
            for ch in vocab.normalized(token_id):
                node = node.children.setdefault(ch, _TrieNode())
            node.token_id = token_id

    def lookup(self, normalized: str, is_continuation: bool) -> Optional[int]:
        """Exact-match query against one namespace; returns the token id or None."""
        node = self._roots[is_continuation]
        for ch in normalized:
            node = node.children.get(ch)
            if node is None:
                return None
        return node.token_id

    def iter_matches(
        self, text: str, start: int, is_continuation: bool
    ) -> Iterator[tuple[int, int]]:
        """Yield (end, token_id) for every token matching text[start:end]."""
        node = self._roots[is_continuation]
        for i in range(start, len(text)):
            node = node.children.get(text[i])
            if node is None:
                return
            if node.token_id is not None:
                yield i + 1, node.token_id

    def longest_match(
        self, text: str, start: int, is_continuation: bool
    ) -> Optional[tuple[int, int]]:
        """Longest-prefix query: the (end, token_id) with maximal end, or None."""
        best = None
        for hit in self.iter_matches(text, start, is_continuation):
            best = hit
        return best


def build_trie(vocab: Vocabulary) -> TokenTrie:
    """Index a vocabulary's surfaces for prefix queries (used by partitioning)."""
    return TokenTrie(vocab)
