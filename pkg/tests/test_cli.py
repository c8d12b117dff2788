"""CLI behavior: artifacts, exit codes, atomicity, manifest digests."""

import hashlib
import json

import numpy as np
import pytest

from vocabtransfer import (
    EmbeddingMatrix,
    TrainerConfig,
    Vocabulary,
    load_matrix,
    load_plan,
    save_matrix,
    train_vocabulary,
)
from vocabtransfer.cli import main

CORPUS = "\n".join(
    [
        "the cat sat on the mat",
        "the bat and the cat chat",
        "that mat sat flat",
        "chat that cat bat",
    ]
)


@pytest.fixture()
def workspace(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text(CORPUS + "\n", encoding="utf-8")
    config = TrainerConfig(target_size=40, min_pair_frequency=1)
    old_vocab, old_merges = train_vocabulary(CORPUS.split("\n"), config)
    old_vocab_path = tmp_path / "old_vocab.txt"
    old_vocab.save(old_vocab_path)
    old_merges_path = tmp_path / "old_merges.txt"
    from vocabtransfer import save_merges

    save_merges(old_merges, old_merges_path)
    rng = np.random.default_rng(0)
    matrix = EmbeddingMatrix(rng.standard_normal((len(old_vocab), 6)).astype(np.float32))
    matrix_path = tmp_path / "old.vtem"
    save_matrix(matrix, matrix_path)
    return {
        "tmp": tmp_path,
        "corpus": corpus,
        "old_vocab": old_vocab_path,
        "old_merges": old_merges_path,
        "old_matrix": matrix_path,
        "old_vocab_obj": old_vocab,
    }


def test_train_vocab_writes_artifacts(workspace, capsys):
    out = workspace["tmp"] / "out"
    code = main(
        [
            "train-vocab",
            "--corpus",
            str(workspace["corpus"]),
            "--size",
            "30",
            "--out",
            str(out),
            "--min-pair-frequency",
            "1",
        ]
    )
    assert code == 0
    assert (out / "vocab_30.txt").is_file()
    assert (out / "merges_30.txt").is_file()
    vocab = Vocabulary.load(out / "vocab_30.txt")
    assert len(vocab) == 30


def test_plan_self_transfer_prints_all_matched(workspace, capsys):
    out = workspace["tmp"] / "out"
    code = main(
        [
            "plan",
            "--new-vocab",
            str(workspace["old_vocab"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--mode",
            "averaged",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    size = len(workspace["old_vocab_obj"])
    assert f"{size} matched, 0 averaged, 0 fallback" in printed
    plan = load_plan(out / "plan.json")
    assert all(d.kind == "matched" for d in plan.directives)


def test_apply_digest_mismatch_names_both_digests(workspace, capsys, tmp_path):
    out = workspace["tmp"] / "planout"
    main(
        [
            "plan",
            "--new-vocab",
            str(workspace["old_vocab"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--out",
            str(out),
        ]
    )
    # a different old vocabulary file: digest no longer matches the plan
    other_vocab = tmp_path / "other_vocab.txt"
    other_vocab.write_text("[UNK]\nzz\n##zz\n", encoding="utf-8")
    rng = np.random.default_rng(1)
    other_matrix = tmp_path / "other.vtem"
    save_matrix(EmbeddingMatrix(rng.standard_normal((3, 6)).astype(np.float32)), other_matrix)
    code = main(
        [
            "apply",
            "--plan",
            str(out / "plan.json"),
            "--old-vocab",
            str(other_vocab),
            "--old-matrix",
            str(other_matrix),
            "--out",
            str(workspace["tmp"] / "applyout"),
        ]
    )
    assert code == 3
    err = capsys.readouterr().err
    assert err.count("\n") == 1  # single line
    plan_digest = load_plan(out / "plan.json").old_vocab_sha256
    other_digest = hashlib.sha256(other_vocab.read_bytes()).hexdigest()
    assert plan_digest in err
    assert other_digest in err


def test_apply_self_transfer_reproduces_matrix(workspace):
    plan_out = workspace["tmp"] / "planout"
    main(
        [
            "plan",
            "--new-vocab",
            str(workspace["old_vocab"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--mode",
            "matched",
            "--out",
            str(plan_out),
        ]
    )
    apply_out = workspace["tmp"] / "applyout"
    code = main(
        [
            "apply",
            "--plan",
            str(plan_out / "plan.json"),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--old-matrix",
            str(workspace["old_matrix"]),
            "--out",
            str(apply_out),
        ]
    )
    assert code == 0
    out_matrix = load_matrix(apply_out / "embeddings.vtem")
    original = load_matrix(workspace["old_matrix"])
    assert out_matrix.to_bytes() == original.to_bytes()
    assert (apply_out / "embeddings.txt").is_file()


def test_encode_lines_align_with_corpus(workspace):
    out = workspace["tmp"] / "enc"
    code = main(
        [
            "encode",
            "--corpus",
            str(workspace["corpus"]),
            "--vocab",
            str(workspace["old_vocab"]),
            "--merges",
            str(workspace["old_merges"]),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    encoded = (out / "encoded.txt").read_text().splitlines()
    assert len(encoded) == len(CORPUS.split("\n"))
    vocab = workspace["old_vocab_obj"]
    first_line_words = CORPUS.split("\n")[0].split()
    ids = [int(x) for x in encoded[0].split()]
    rebuilt = []
    word = ""
    for token_id in ids:
        piece = vocab.normalized(token_id)
        if vocab.is_continuation(token_id):
            word += piece
        else:
            if word:
                rebuilt.append(word)
            word = piece
    rebuilt.append(word)
    assert rebuilt == first_line_words


def test_stats_report_written(workspace):
    out = workspace["tmp"] / "stats"
    code = main(
        [
            "stats",
            "--corpus",
            str(workspace["corpus"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--old-merges",
            str(workspace["old_merges"]),
            "--new-vocab",
            str(workspace["old_vocab"]),
            "--new-merges",
            str(workspace["old_merges"]),
            "--out",
            str(out),
        ]
    )
    assert code == 0
    doc = json.loads((out / "drift_report.json").read_text())
    assert doc["ratio"] == 1.0


def _run_pipeline(workspace, out, sizes=(20, 30), seed=None):
    argv = [
        "pipeline",
        "--corpus",
        str(workspace["corpus"]),
        "--old-vocab",
        str(workspace["old_vocab"]),
        "--old-merges",
        str(workspace["old_merges"]),
        "--old-matrix",
        str(workspace["old_matrix"]),
        "--mode",
        "averaged",
        "--out",
        str(out),
        "--min-pair-frequency",
        "1",
    ]
    for size in sizes:
        argv += ["--size", str(size)]
    if seed is not None:
        argv += ["--fallback", "random_normal", "--seed", str(seed)]
    return main(argv)


def test_pipeline_artifacts_and_manifest_digests(workspace):
    out = workspace["tmp"] / "pipe"
    code = _run_pipeline(workspace, out)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["sizes"] == [20, 30]
    roles = [a["role"] for a in manifest["artifacts"]]
    assert roles.count("vocab") == 2
    assert roles.count("plan") == 2
    assert roles.count("matrix") == 2
    assert roles.count("report") == 1
    # rehash oracle: every digest in the manifest matches the file bytes
    for artifact in manifest["artifacts"]:
        data = (out / artifact["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == artifact["sha256"]
    for entry in manifest["inputs"].values():
        if entry is None:
            continue
        data = open(entry["path"], "rb").read()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]


def test_pipeline_deterministic_across_out_dirs(workspace):
    out1 = workspace["tmp"] / "run1"
    out2 = workspace["tmp"] / "run2"
    assert _run_pipeline(workspace, out1, seed=7) == 0
    assert _run_pipeline(workspace, out2, seed=7) == 0
    files1 = sorted(p.name for p in out1.iterdir())
    files2 = sorted(p.name for p in out2.iterdir())
    assert files1 == files2
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_pipeline_single_size(workspace):
    out = workspace["tmp"] / "single"
    assert _run_pipeline(workspace, out, sizes=(25,)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [a["role"] for a in manifest["artifacts"] if a["role"] == "vocab"] == ["vocab"]


def test_pipeline_empty_corpus_creates_nothing(workspace, capsys):
    empty = workspace["tmp"] / "empty.txt"
    empty.write_text("   \n\n", encoding="utf-8")
    out = workspace["tmp"] / "emptyout"
    argv_corpus = {"corpus": empty}
    code = main(
        [
            "pipeline",
            "--corpus",
            str(empty),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--old-matrix",
            str(workspace["old_matrix"]),
            "--size",
            "20",
            "--out",
            str(out),
        ]
    )
    assert code == 3
    assert list(out.iterdir()) == []


def test_pipeline_failure_removes_partial_outputs(workspace, capsys, tmp_path):
    # an old vocabulary without [UNK] lets train/plan/apply succeed but makes
    # the drift-report stage fail; nothing may remain published
    lines = CORPUS.split("\n")
    config = TrainerConfig(target_size=40, specials=("[PAD]",), min_pair_frequency=1)
    no_unk_vocab, no_unk_merges = train_vocabulary(lines, config)
    vocab_path = tmp_path / "no_unk_vocab.txt"
    no_unk_vocab.save(vocab_path)
    from vocabtransfer import save_merges

    merges_path = tmp_path / "no_unk_merges.txt"
    save_merges(no_unk_merges, merges_path)
    rng = np.random.default_rng(2)
    matrix_path = tmp_path / "no_unk.vtem"
    save_matrix(
        EmbeddingMatrix(rng.standard_normal((len(no_unk_vocab), 6)).astype(np.float32)),
        matrix_path,
    )
    out = workspace["tmp"] / "cleanup"
    code = main(
        [
            "pipeline",
            "--corpus",
            str(workspace["corpus"]),
            "--old-vocab",
            str(vocab_path),
            "--old-merges",
            str(merges_path),
            "--old-matrix",
            str(matrix_path),
            "--size",
            "20",
            "--specials",
            "[PAD]",
            "--out",
            str(out),
            "--min-pair-frequency",
            "1",
        ]
    )
    assert code == 3
    assert list(out.iterdir()) == []


def test_usage_error_exits_two(workspace):
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--new-vocab", str(workspace["old_vocab"])])
    assert exc.value.code == 2


def test_sizes_must_increase(workspace, capsys):
    out = workspace["tmp"] / "bad"
    code = main(
        [
            "pipeline",
            "--corpus",
            str(workspace["corpus"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--old-matrix",
            str(workspace["old_matrix"]),
            "--size",
            "30",
            "--size",
            "20",
            "--out",
            str(out),
        ]
    )
    assert code == 3
    assert "strictly increasing" in capsys.readouterr().err


def test_missing_input_exits_three(workspace, capsys):
    code = main(
        [
            "plan",
            "--new-vocab",
            str(workspace["tmp"] / "nope.txt"),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--out",
            str(workspace["tmp"] / "x"),
        ]
    )
    assert code == 3
    assert "not found" in capsys.readouterr().err


def test_out_dir_must_differ_from_inputs(workspace, capsys):
    code = main(
        [
            "train-vocab",
            "--corpus",
            str(workspace["corpus"]),
            "--size",
            "20",
            "--out",
            str(workspace["corpus"]),
        ]
    )
    assert code == 3
    assert "distinct" in capsys.readouterr().err


def test_text_matrix_input_accepted(workspace):
    # old matrix supplied in the plain-text interop format
    from vocabtransfer import load_matrix as _load, save_matrix_text

    original = _load(workspace["old_matrix"])
    text_path = workspace["tmp"] / "old_embeddings.txt"
    save_matrix_text(original, text_path)
    out = workspace["tmp"] / "textpipe"
    code = main(
        [
            "pipeline",
            "--corpus",
            str(workspace["corpus"]),
            "--old-vocab",
            str(workspace["old_vocab"]),
            "--old-merges",
            str(workspace["old_merges"]),
            "--old-matrix",
            str(text_path),
            "--size",
            "20",
            "--out",
            str(out),
            "--min-pair-frequency",
            "1",
        ]
    )
    assert code == 0
    assert (out / "embeddings_20.vtem").is_file()
