"""Embedding matrices: bit-exact file formats and transfer-plan materialization.

Binary format: magic ``VTEM`` | version u32 LE | rows u64 LE | dim u64 LE |
payload rows*dim float32 LE row-major. A plain-text export (one row per line,
space-separated decimals with float32 round-trip precision) is provided for
interop with the fine-tuning harness.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    DigestMismatchError,
    NonFiniteError,
    PlanError,
    SizeMismatchError,
)
from .transfer import AVERAGED, FALLBACK, MATCHED, TransferPlan

MAGIC = b"VTEM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")

GLOBAL_MEAN = "global_mean"
RANDOM_NORMAL = "random_normal"
ZERO = "zero"
FALLBACK_KINDS = (GLOBAL_MEAN, RANDOM_NORMAL, ZERO)


class EmbeddingMatrix:
    """Immutable (rows, dim) float32 matrix; row i belongs to token id i."""

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise SizeMismatchError(
                f"expected a 2-D matrix with dim >= 1, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteError("matrix contains NaN or infinite values")
        arr.setflags(write=False)
        self.data = arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            (self.data == other.data).all()
        )

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, self.rows, self.dim)
        return header + self.data.astype("<f4", copy=False).tobytes(order="C")


def save_matrix(matrix: EmbeddingMatrix, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(matrix.to_bytes())
    except OSError as exc:
        raise OSError(f"cannot write matrix file {path}: {exc}") from exc


def load_matrix(path) -> EmbeddingMatrix:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise OSError(f"cannot read matrix file {path}: {exc}") from exc
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < _HEADER.size:
        raise SizeMismatchError(f"{path}: truncated header ({len(raw)} bytes)")
    _, version, rows, dim = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    if dim < 1:
        raise SizeMismatchError(f"{path}: dim must be >= 1, got {dim}")
    expected = _HEADER.size + rows * dim * 4
    if len(raw) != expected:
        raise SizeMismatchError(
            f"{path}: payload is {len(raw) - _HEADER.size} bytes, "
            f"header declares {rows}x{dim} ({expected - _HEADER.size} bytes)"
        )
    arr = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dim)
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{path}: matrix contains NaN or infinite values")
    return EmbeddingMatrix(arr)


def matrix_text_to_bytes(matrix: EmbeddingMatrix) -> bytes:
    lines = (
        " ".join("%.9g" % float(v) for v in row) + "\n" for row in matrix.data
    )
    return "".join(lines).encode("utf-8")


def save_matrix_text(matrix: EmbeddingMatrix, path) -> None:
    """One row per line, space-separated decimals (float32 round-trip exact)."""
    try:
        with open(path, "wb") as f:
            f.write(matrix_text_to_bytes(matrix))
    except OSError as exc:
        raise OSError(f"cannot write matrix text file {path}: {exc}") from exc


def load_matrix_text(path) -> EmbeddingMatrix:
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().split("\n")
    except OSError as exc:
        raise OSError(f"cannot read matrix text file {path}: {exc}") from exc
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SizeMismatchError(f"{path}: empty matrix text file")
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        try:
            values = [float(v) for v in line.split()]
        except ValueError as exc:
            raise SizeMismatchError(f"{path}: line {lineno}: {exc}") from exc
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise SizeMismatchError(
                f"{path}: line {lineno} has {len(values)} values, expected {width}"
            )
        rows.append(values)
    return EmbeddingMatrix(np.array(rows, dtype=np.float32))


@dataclass(frozen=True)
class FallbackStrategy:
    """Initialization for new tokens that neither match nor partition.

    ``global_mean`` (default) uses the mean of all old rows; ``zero`` uses
    zeros; ``random_normal`` draws per-dimension mean + scale * N(0, 1) with
    scale defaulting to the old matrix's per-dimension standard deviation.
    """

    kind: str = GLOBAL_MEAN
    seed: Optional[int] = None
    scale: Optional[float] = None

    def validate(self) -> None:
        if self.kind not in FALLBACK_KINDS:
            raise ValueError(f"fallback kind must be one of {FALLBACK_KINDS}")
        if self.kind == RANDOM_NORMAL and self.seed is None:
            raise ValueError("random_normal fallback requires an explicit seed")


def _fallback_rows(
    strategy: FallbackStrategy, old: np.ndarray, n_rows: int
) -> np.ndarray:
    dim = old.shape[1]
    if strategy.kind == ZERO:
        return np.zeros((n_rows, dim), dtype=np.float32)
    mean = old.mean(axis=0, dtype=np.float64)
    if strategy.kind == GLOBAL_MEAN:
        return np.broadcast_to(mean.astype(np.float32), (n_rows, dim))
    # random_normal: one positional stream so row i never depends on how many
    # fallback rows precede it
    rng = np.random.default_rng(strategy.seed)
    noise = rng.standard_normal((n_rows, dim))
    scale = old.std(axis=0, dtype=np.float64) if strategy.scale is None else strategy.scale
    return (mean + noise * scale).astype(np.float32)


def apply_transfer(
    plan: TransferPlan,
    old: EmbeddingMatrix,
    fallback: FallbackStrategy = FallbackStrategy(),
    expected_old_digest: Optional[str] = None,
) -> EmbeddingMatrix:
    """Materialize a plan into a new matrix.

    Matched rows are bit-identical copies; averaged rows are arithmetic means
    accumulated in float64 and rounded once to float32; fallback rows follow
    the strategy. Each output row depends only on its own directive.
    """
    fallback.validate()
    if expected_old_digest is not None and expected_old_digest != plan.old_vocab_sha256:
        raise DigestMismatchError(
            f"old-vocabulary digest mismatch: plan has {plan.old_vocab_sha256}, "
            f"supplied {expected_old_digest}"
        )
    if plan.old_size is not None and plan.old_size != old.rows:
        raise PlanError(
            f"plan was built against {plan.old_size} old tokens, "
            f"matrix has {old.rows} rows"
        )
    src = old.data
    n_new = len(plan.directives)
    out = np.empty((n_new, old.dim), dtype=np.float32)

    matched_new: list[int] = []
    matched_old: list[int] = []
    fallback_ids: list[int] = []
    for i, directive in enumerate(plan.directives):
        for s in directive.sources:
            if not 0 <= s < old.rows:
                raise PlanError(
                    f"directive {i}: source id {s} out of range "
                    f"for {old.rows} old rows"
                )
        if directive.kind == MATCHED:
            matched_new.append(i)
            matched_old.append(directive.sources[0])
        elif directive.kind == AVERAGED:
            out[i] = src[list(directive.sources)].mean(axis=0, dtype=np.float64)
        elif directive.kind == FALLBACK:
            fallback_ids.append(i)
        else:
            raise PlanError(f"directive {i}: unknown kind {directive.kind!r}")
    if fallback_ids:
        base = _fallback_rows(fallback, src, n_new)
        out[fallback_ids] = base[fallback_ids]
    if matched_new:
        out[matched_new] = src[matched_old]
    return EmbeddingMatrix(out)
