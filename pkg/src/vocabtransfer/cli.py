"""Command-line orchestration: train, plan, apply, stats, encode, pipeline.

Every subcommand validates its flags before doing work, writes declared
artifacts atomically (write-to-temp then rename) under ``--out``, exits 0 on
success, and on failure prints one machine-parsable line to stderr with exit
code 2 (usage), 3 (input validation), or 4 (I/O). Artifact file names are
fixed so reruns with equal inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .embeddings import (
    FALLBACK_KINDS,
    EmbeddingMatrix,
    FallbackStrategy,
    apply_transfer,
    load_matrix,
    load_matrix_text,
    matrix_text_to_bytes,
)
from .errors import VocabTransferError
from .stats import compare_vocabularies, report_to_bytes
from .subwords import (
    DEFAULT_SPECIALS,
    SubwordEncoder,
    TrainerConfig,
    load_merges,
    merges_to_bytes,
    train_vocabulary,
    train_vocabulary_sweep,
)
from .transfer import MODES, build_transfer_plan, load_plan, plan_summary, plan_to_bytes
from .vocab import DEFAULT_MARKER, Vocabulary

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

DEFAULT_SIZES = [8000, 16000, 32000]


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _require_inputs(args, names: Sequence[str]) -> None:
    for name in names:
        value = getattr(args, name.replace("-", "_"), None)
        if value is None:
            continue
        path = Path(value)
        if not path.is_file():
            raise VocabTransferError(f"input file not found: {path}")


def _prepare_out_dir(out: str, inputs: Sequence[Optional[str]]) -> Path:
    out_dir = Path(out).resolve()
    for value in inputs:
        if value is None:
            continue
        resolved = Path(value).resolve()
        if resolved == out_dir or out_dir in resolved.parents:
            raise VocabTransferError(
                f"output directory {out_dir} must be distinct from input path {value}"
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _read_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return f.read().split("\n")


def _load_matrix_any(path) -> EmbeddingMatrix:
    if str(path).endswith(".txt"):
        return load_matrix_text(path)
    return load_matrix(path)


def _trainer_config(args, target_size: int) -> TrainerConfig:
    return TrainerConfig(
        target_size=target_size,
        marker=args.marker,
        specials=tuple(args.specials) if args.specials else DEFAULT_SPECIALS,
        min_pair_frequency=args.min_pair_frequency,
        max_token_length=args.max_token_length,
        lowercase=args.lowercase,
    )


def _fallback_strategy(args) -> FallbackStrategy:
    strategy = FallbackStrategy(kind=args.fallback, seed=args.seed, scale=args.scale)
    try:
        strategy.validate()
    except ValueError as exc:
        raise VocabTransferError(str(exc)) from exc
    return strategy


def cmd_train_vocab(args) -> int:
    _require_inputs(args, ["corpus"])
    out_dir = _prepare_out_dir(args.out, [args.corpus])
    config = _trainer_config(args, args.size[0] if args.size else 8000)
    sizes = sorted(args.size) if args.size else [8000]
    results = train_vocabulary_sweep(_read_lines(args.corpus), config, sizes)
    for size, (vocab, merges) in zip(sizes, results):
        vocab_path = out_dir / f"vocab_{size}.txt"
        merges_path = out_dir / f"merges_{size}.txt"
        _write_atomic(vocab_path, vocab.to_bytes())
        _write_atomic(merges_path, merges_to_bytes(merges))
        print(f"trained {len(vocab)} tokens ({len(merges)} merges) -> {vocab_path}")
    return 0


def cmd_plan(args) -> int:
    _require_inputs(args, ["new-vocab", "old-vocab"])
    out_dir = _prepare_out_dir(args.out, [args.new_vocab, args.old_vocab])
    new_vocab = Vocabulary.load(args.new_vocab, marker=args.marker)
    old_vocab = Vocabulary.load(args.old_vocab, marker=args.marker)
    plan = build_transfer_plan(new_vocab, old_vocab, args.mode)
    plan_path = out_dir / "plan.json"
    _write_atomic(plan_path, plan_to_bytes(plan))
    summary = plan_summary(plan)
    print(
        f"plan {args.mode}: {summary.matched} matched, {summary.averaged} averaged, "
        f"{summary.fallback} fallback -> {plan_path}"
    )
    return 0


def cmd_apply(args) -> int:
    _require_inputs(args, ["plan", "old-vocab", "old-matrix"])
    out_dir = _prepare_out_dir(args.out, [args.plan, args.old_vocab, args.old_matrix])
    plan = load_plan(args.plan)
    old_digest = _sha256_file(Path(args.old_vocab))
    old_vocab = Vocabulary.load(args.old_vocab, marker=args.marker)
    old_matrix = _load_matrix_any(args.old_matrix)
    if old_matrix.rows != len(old_vocab):
        raise VocabTransferError(
            f"old matrix has {old_matrix.rows} rows, old vocabulary has "
            f"{len(old_vocab)} tokens"
        )
    plan.old_size = len(old_vocab)
    strategy = _fallback_strategy(args)
    new_matrix = apply_transfer(
        plan, old_matrix, strategy, expected_old_digest=old_digest
    )
    matrix_path = out_dir / "embeddings.vtem"
    text_path = out_dir / "embeddings.txt"
    _write_atomic(matrix_path, new_matrix.to_bytes())
    _write_atomic(text_path, matrix_text_to_bytes(new_matrix))
    print(f"initialized {new_matrix.rows}x{new_matrix.dim} -> {matrix_path}")
    return 0


def cmd_stats(args) -> int:
    _require_inputs(args, ["corpus", "old-vocab", "new-vocab", "old-merges", "new-merges"])
    out_dir = _prepare_out_dir(
        args.out,
        [args.corpus, args.old_vocab, args.new_vocab, args.old_merges, args.new_merges],
    )
    old_vocab = Vocabulary.load(args.old_vocab, marker=args.marker)
    new_vocab = Vocabulary.load(args.new_vocab, marker=args.marker)
    old_merges = (
        load_merges(args.old_merges, marker=args.marker) if args.old_merges else None
    )
    new_merges = (
        load_merges(args.new_merges, marker=args.marker) if args.new_merges else None
    )
    report = compare_vocabularies(
        _read_lines(args.corpus),
        old_vocab,
        new_vocab,
        old_merges=old_merges,
        new_merges=new_merges,
        top_k=args.top_k,
    )
    report_path = out_dir / "drift_report.json"
    _write_atomic(report_path, report_to_bytes(report))
    print(
        f"fertility {report.old_fertility:.4f} -> {report.new_fertility:.4f} "
        f"(ratio {report.ratio:.4f}) -> {report_path}"
    )
    return 0


def cmd_encode(args) -> int:
    _require_inputs(args, ["corpus", "vocab", "merges"])
    out_dir = _prepare_out_dir(args.out, [args.corpus, args.vocab, args.merges])
    vocab = Vocabulary.load(args.vocab, marker=args.marker)
    merges = load_merges(args.merges, marker=args.marker) if args.merges else None
    if merges is None:
        from .subwords import LongestMatchEncoder

        encoder = LongestMatchEncoder(vocab)
    else:
        encoder = SubwordEncoder(vocab, merges)
    lines = _read_lines(args.corpus)
    if lines and lines[-1] == "":
        lines.pop()
    out_lines = []
    for line in lines:
        ids: list[int] = []
        for word in line.split():
            ids.extend(encoder.encode_word(word))
        out_lines.append(" ".join(str(i) for i in ids))
    encoded_path = out_dir / "encoded.txt"
    _write_atomic(encoded_path, ("\n".join(out_lines) + "\n").encode("utf-8"))
    print(f"encoded {len(out_lines)} lines -> {encoded_path}")
    return 0


def cmd_pipeline(args) -> int:
    _require_inputs(args, ["corpus", "old-vocab", "old-merges", "old-matrix"])
    sizes = args.size if args.size else list(DEFAULT_SIZES)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise VocabTransferError(f"sizes must be strictly increasing, got {sizes}")
    inputs = [args.corpus, args.old_vocab, args.old_merges, args.old_matrix]
    out_dir = _prepare_out_dir(args.out, inputs)
    strategy = _fallback_strategy(args)

    old_vocab = Vocabulary.load(args.old_vocab, marker=args.marker)
    old_merges = (
        load_merges(args.old_merges, marker=args.marker) if args.old_merges else None
    )
    old_matrix = _load_matrix_any(args.old_matrix)
    if old_matrix.rows != len(old_vocab):
        raise VocabTransferError(
            f"old matrix has {old_matrix.rows} rows, old vocabulary has "
            f"{len(old_vocab)} tokens"
        )
    corpus_lines = _read_lines(args.corpus)

    published: list[Path] = []
    artifacts: list[dict] = []

    def publish(name: str, role: str, data: bytes, size: Optional[int]) -> Path:
        path = out_dir / name
        _write_atomic(path, data)
        published.append(path)
        entry = {"role": role, "path": name}
        if size is not None:
            entry["size"] = size
        entry["sha256"] = hashlib.sha256(data).hexdigest()
        artifacts.append(entry)
        return path

    try:
        config = _trainer_config(args, sizes[-1])
        results = train_vocabulary_sweep(corpus_lines, config, sizes)
        for size, (vocab, merges) in zip(sizes, results):
            publish(f"vocab_{size}.txt", "vocab", vocab.to_bytes(), size)
            publish(f"merges_{size}.txt", "merges", merges_to_bytes(merges), size)
            plan = build_transfer_plan(vocab, old_vocab, args.mode)
            publish(f"plan_{size}.json", "plan", plan_to_bytes(plan), size)
            new_matrix = apply_transfer(plan, old_matrix, strategy)
            publish(f"embeddings_{size}.vtem", "matrix", new_matrix.to_bytes(), size)
            publish(
                f"embeddings_{size}.txt",
                "matrix_text",
                matrix_text_to_bytes(new_matrix),
                size,
            )
            summary = plan_summary(plan)
            print(
                f"size {size}: {len(vocab)} tokens, {summary.matched} matched, "
                f"{summary.averaged} averaged, {summary.fallback} fallback"
            )
        largest_vocab, largest_merges = results[-1]
        report = compare_vocabularies(
            corpus_lines,
            old_vocab,
            largest_vocab,
            old_merges=old_merges,
            new_merges=largest_merges,
            top_k=args.top_k,
        )
        publish("drift_report.json", "report", report_to_bytes(report), None)

        manifest = {
            "version": 1,
            "mode": args.mode,
            "fallback": {
                "kind": strategy.kind,
                "seed": strategy.seed,
                "scale": strategy.scale,
            },
            "sizes": sizes,
            "inputs": {
                "corpus": {"path": args.corpus, "sha256": _sha256_file(Path(args.corpus))},
                "old_vocab": {
                    "path": args.old_vocab,
                    "sha256": _sha256_file(Path(args.old_vocab)),
                },
                "old_merges": (
                    {
                        "path": args.old_merges,
                        "sha256": _sha256_file(Path(args.old_merges)),
                    }
                    if args.old_merges
                    else None
                ),
                "old_matrix": {
                    "path": args.old_matrix,
                    "sha256": _sha256_file(Path(args.old_matrix)),
                },
            },
            "artifacts": artifacts,
        }
        manifest_bytes = (
            json.dumps(manifest, ensure_ascii=False, indent=2) + "\n"
        ).encode("utf-8")
        manifest_path = out_dir / "manifest.json"
        _write_atomic(manifest_path, manifest_bytes)
        print(f"manifest with {len(artifacts)} artifacts -> {manifest_path}")
        return 0
    except BaseException:
        for path in published:
            try:
                path.unlink()
            except OSError:
                pass
        raise


def _add_common_trainer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--min-pair-frequency", type=int, default=2)
    parser.add_argument("--max-token-length", type=int, default=64)
    parser.add_argument("--lowercase", action="store_true")
    parser.add_argument(
        "--specials",
        action="append",
        metavar="TOKEN",
        help="special token surface (repeatable; default [PAD]/[UNK]/[CLS]/[SEP]/[MASK])",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocabtransfer",
        description="Corpus-specific subword vocabularies with matched/averaged "
        "embedding transfer",
    )
    parser.add_argument("--marker", default=DEFAULT_MARKER)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-vocab", help="train vocabularies from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--size", type=int, action="append", metavar="N")
    p.add_argument("--out", required=True)
    _add_common_trainer_flags(p)
    p.set_defaults(func=cmd_train_vocab)

    p = sub.add_parser("plan", help="compute an old-to-new transfer plan")
    p.add_argument("--new-vocab", required=True)
    p.add_argument("--old-vocab", required=True)
    p.add_argument("--mode", choices=MODES, default="averaged")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("apply", help="materialize a plan into an embedding matrix")
    p.add_argument("--plan", required=True)
    p.add_argument("--old-vocab", required=True)
    p.add_argument("--old-matrix", required=True)
    p.add_argument("--fallback", choices=FALLBACK_KINDS, default="global_mean")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("stats", help="tokenization drift report for two vocabularies")
    p.add_argument("--corpus", required=True)
    p.add_argument("--old-vocab", required=True)
    p.add_argument("--old-merges")
    p.add_argument("--new-vocab", required=True)
    p.add_argument("--new-merges")
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("encode", help="encode a corpus into token-id lines")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--merges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("pipeline", help="train, plan, apply, and report per size")
    p.add_argument("--corpus", required=True)
    p.add_argument("--old-vocab", required=True)
    p.add_argument("--old-merges")
    p.add_argument("--old-matrix", required=True)
    p.add_argument(
        "--size",
        type=int,
        action="append",
        metavar="N",
        help=f"target vocabulary size (repeatable; default {DEFAULT_SIZES})",
    )
    p.add_argument("--mode", choices=MODES, default="averaged")
    p.add_argument("--fallback", choices=FALLBACK_KINDS, default="global_mean")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--out", required=True)
    _add_common_trainer_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VocabTransferError as exc:
        message = " ".join(str(exc).split())
        print(f"vocabtransfer: error: validation: {message}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        message = " ".join(str(exc).split())
        print(f"vocabtransfer: error: io: {message}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
