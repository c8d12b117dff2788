"""Old-to-new vocabulary transfer planning.

Each new token receives one symbolic directive: ``matched`` when an old token
has the byte-equal surface, ``averaged`` over a partition of old tokens whose
marker-normalized concatenation reproduces the token, else ``fallback``. The
partition chosen is the one with the fewest segments; among those, the one
whose longest segment is longest; remaining ties go to the lexicographically
greatest length sequence read left to right (leftmost-longest).

Plans are purely symbolic (old token ids, no embedding values) so one plan can
be materialized against any embedding source with matching provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import PlanError
from .vocab import Token, TokenTrie, Vocabulary, split_marker

MATCHED = "matched"
AVERAGED = "averaged"
FALLBACK = "fallback"

MODES = (MATCHED, AVERAGED)


@dataclass(frozen=True)
class Partition:
    """Ordered old-token ids whose normalized surfaces concatenate to a target."""

    segments: tuple[int, ...]


@dataclass(frozen=True)
class InitDirective:
    kind: str
    sources: tuple[int, ...] = ()


@dataclass
class TransferPlan:
    mode: str
    old_vocab_sha256: str
    new_vocab_sha256: str
    tokens: list[str]
    directives: list[InitDirective]
    old_size: Optional[int] = field(default=None, compare=False)


def match_tokens(new_vocab: Vocabulary, old_vocab: Vocabulary) -> dict[int, int]:
    """Map new ids to old ids for byte-equal surfaces (injective by uniqueness)."""
    if new_vocab.marker != old_vocab.marker:
        raise PlanError(
            f"marker mismatch between vocabularies: "
            f"{new_vocab.marker!r} vs {old_vocab.marker!r}"
        )
    mapping = {}
    for new_id in range(len(new_vocab)):
        old_id = old_vocab.id_of(new_vocab.surface(new_id))
        if old_id is not None:
            mapping[new_id] = old_id
    return mapping


def min_partition(token: Token, old_trie: TokenTrie) -> Optional[Partition]:
    """Best partition of ``token`` into old-vocabulary tokens, or None.

    The first segment shares the token's continuation status; later segments
    are continuation tokens. Minimizes segment count, then maximizes the
    longest segment, then prefers the leftmost-longest length sequence.
    """
    marker = old_trie.marker
    target, target_cont = split_marker(token.surface, marker)
    n = len(target)

    # matches[i] = [(end, old_id), ...] in increasing end; namespace by position
    matches = []
    for i in range(n):
        cont = target_cont if i == 0 else True
        matches.append(list(old_trie.iter_matches(target, i, cont)))

    inf = n + 1
    fwd = [inf] * (n + 1)
    fwd[0] = 0
    for i in range(n):
        if fwd[i] >= inf:
            continue
        step = fwd[i] + 1
        for end, _ in matches[i]:
            if step < fwd[end]:
                fwd[end] = step
    if fwd[n] >= inf:
        return None
    k = fwd[n]

    # bwd[i] = min continuation segments covering target[i:], for i >= 1
    bwd = [inf] * (n + 1)
    bwd[n] = 0
    for i in range(n - 1, 0, -1):
        best = inf
        for end, _ in matches[i]:
            if bwd[end] + 1 < best:
                best = bwd[end] + 1
        bwd[i] = best

    # longest segment usable inside some minimal partition
    longest = 0
    for i in range(n):
        if fwd[i] >= inf:
            continue
        for end, _ in matches[i]:
            if fwd[i] + 1 + bwd[end] == k and end - i > longest:
                longest = end - i

    # cover[i] bit r set iff target[i:] splits into exactly r continuation
    # segments; big[i] additionally requires a segment of length ``longest``
    cover = [0] * (n + 1)
    big = [0] * (n + 1)
    cover[n] = 1
    for i in range(n - 1, 0, -1):
        c = 0
        b = 0
        for end, _ in matches[i]:
            c |= cover[end] << 1
            b |= big[end] << 1
            if end - i == longest:
                b |= cover[end] << 1
        cover[i] = c
        big[i] = b

    segments: list[int] = []
    pos = 0
    used = 0
    placed = False
    while pos < n:
        remaining = k - used - 1
        choice = None
        for end, old_id in reversed(matches[pos]):
            if end == n:
                if remaining != 0:
                    continue
            elif not (cover[end] >> remaining) & 1:
                continue
            if not (
                placed
                or end - pos == longest
                or (end < n and (big[end] >> remaining) & 1)
            ):
                continue
            choice = (end, old_id)
            break
        if choice is None:  # unreachable if the DP tables are consistent
            raise PlanError(f"partition reconstruction failed for {token.surface!r}")
        end, old_id = choice
        if end - pos == longest:
            placed = True
        segments.append(old_id)
        used += 1
        pos = end

    partition = Partition(tuple(segments))
    _verify_partition(partition, token, old_trie)
    return partition


def _verify_partition(partition: Partition, token: Token, trie: TokenTrie) -> None:
    # cheap post-condition check, kept on in production paths
    vocab = trie.vocab
    target, target_cont = split_marker(token.surface, trie.marker)
    if not partition.segments:
        raise PlanError("empty partition")
    concat = "".join(vocab.normalized(i) for i in partition.segments)
    first_cont = vocab.is_continuation(partition.segments[0])
    rest_cont = all(vocab.is_continuation(i) for i in partition.segments[1:])
    if concat != target or first_cont != target_cont or not rest_cont:
        raise PlanError(
            f"invalid partition {partition.segments} for token {token.surface!r}"
        )


def build_transfer_plan(
    new_vocab: Vocabulary, old_vocab: Vocabulary, mode: str
) -> TransferPlan:
    """Plan initialization for every new token under the given transfer mode.

    Exact matches always win; in ``averaged`` mode the remaining tokens are
    partitioned when possible. Special tokens only ever match by name or fall
    back, never average.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    matched = match_tokens(new_vocab, old_vocab)
    trie = TokenTrie(old_vocab) if mode == AVERAGED else None
    directives = []
    for new_id in range(len(new_vocab)):
        old_id = matched.get(new_id)
        if old_id is not None:
            directives.append(InitDirective(MATCHED, (old_id,)))
        elif mode == AVERAGED and new_id not in new_vocab.specials:
            partition = min_partition(new_vocab.token(new_id), trie)
            if partition is None:
                directives.append(InitDirective(FALLBACK))
            else:
                directives.append(InitDirective(AVERAGED, partition.segments))
        else:
            directives.append(InitDirective(FALLBACK))
    return TransferPlan(
        mode=mode,
        old_vocab_sha256=old_vocab.sha256,
        new_vocab_sha256=new_vocab.sha256,
        tokens=[new_vocab.surface(i) for i in range(len(new_vocab))],
        directives=directives,
        old_size=len(old_vocab),
    )


@dataclass(frozen=True)
class PlanSummary:
    matched: int
    averaged: int
    fallback: int
    partition_lengths: dict[int, int]


def plan_summary(plan: TransferPlan) -> PlanSummary:
    """Directive counts plus a histogram of averaged-partition lengths."""
    counts = {MATCHED: 0, AVERAGED: 0, FALLBACK: 0}
    lengths: dict[int, int] = {}
    for directive in plan.directives:
        counts[directive.kind] += 1
        if directive.kind == AVERAGED:
            size = len(directive.sources)
            lengths[size] = lengths.get(size, 0) + 1
    return PlanSummary(
        matched=counts[MATCHED],
        averaged=counts[AVERAGED],
        fallback=counts[FALLBACK],
        partition_lengths=dict(sorted(lengths.items())),
    )


def plan_to_bytes(plan: TransferPlan) -> bytes:
    doc = {
        "mode": plan.mode,
        "old_vocab_sha256": plan.old_vocab_sha256,
        "new_vocab_sha256": plan.new_vocab_sha256,
        "directives": [
            {
                "token": token,
                "kind": directive.kind,
                "sources": list(directive.sources),
            }
            for token, directive in zip(plan.tokens, plan.directives)
        ],
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def save_plan(plan: TransferPlan, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(plan_to_bytes(plan))
    except OSError as exc:
        raise OSError(f"cannot write plan file {path}: {exc}") from exc


def load_plan(path) -> TransferPlan:
    try:
        with open(path, "rb") as f:
            doc = json.loads(f.read().decode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read plan file {path}: {exc}") from exc
    except ValueError as exc:
        raise PlanError(f"{path}: not valid JSON: {exc}") from exc
    try:
        mode = doc["mode"]
        old_sha = doc["old_vocab_sha256"]
        new_sha = doc["new_vocab_sha256"]
        raw_directives = doc["directives"]
    except (KeyError, TypeError) as exc:
        raise PlanError(f"{path}: missing plan field: {exc}") from exc
    if mode not in MODES:
        raise PlanError(f"{path}: unknown mode {mode!r}")
    tokens = []
    directives = []
    for i, entry in enumerate(raw_directives):
        kind = entry.get("kind")
        sources = entry.get("sources")
        token = entry.get("token")
        if kind not in (MATCHED, AVERAGED, FALLBACK):
            raise PlanError(f"{path}: directive {i}: unknown kind {kind!r}")
        if not isinstance(sources, list) or not all(
            isinstance(s, int) and s >= 0 for s in sources
        ):
            raise PlanError(f"{path}: directive {i}: bad sources {sources!r}")
        if kind == MATCHED and len(sources) != 1:
            raise PlanError(f"{path}: directive {i}: matched needs one source")
        if kind == AVERAGED and not sources:
            raise PlanError(f"{path}: directive {i}: averaged needs sources")
        if kind == FALLBACK and sources:
            raise PlanError(f"{path}: directive {i}: fallback takes no sources")
        if mode == MATCHED and kind == AVERAGED:
            raise PlanError(f"{path}: directive {i}: averaged directive in matched mode")
        if not isinstance(token, str):
            raise PlanError(f"{path}: directive {i}: bad token {token!r}")
        tokens.append(token)
        directives.append(InitDirective(kind, tuple(sources)))
    return TransferPlan(
        mode=mode,
        old_vocab_sha256=old_sha,
        new_vocab_sha256=new_sha,
        tokens=tokens,
        directives=directives,
    )
