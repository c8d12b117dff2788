"""Matrix file formats and transfer materialization."""

import math
import struct

import numpy as np
import pytest

from vocabtransfer import (
    BadMagicError,
    BadVersionError,
    EmbeddingMatrix,
    FallbackStrategy,
    NonFiniteError,
    PlanError,
    SizeMismatchError,
    Vocabulary,
    apply_transfer,
    build_transfer_plan,
    load_matrix,
    load_matrix_text,
    save_matrix,
    save_matrix_text,
)
from vocabtransfer.errors import DigestMismatchError
from vocabtransfer.transfer import InitDirective, TransferPlan


def _plan(directives, mode="averaged", old_size=None, tokens=None):
    return TransferPlan(
        mode=mode,
        old_vocab_sha256="0" * 64,
        new_vocab_sha256="1" * 64,
        tokens=tokens or [f"t{i}" for i in range(len(directives))],
        directives=directives,
        old_size=old_size,
    )


def test_binary_format_bytes_exact(tmp_path):
    matrix = EmbeddingMatrix(np.array([[0.5, 0.5]], dtype=np.float32))
    path = tmp_path / "m.vtem"
    save_matrix(matrix, path)
    raw = path.read_bytes()
    expected = (
        b"VTEM"
        + struct.pack("<I", 1)
        + struct.pack("<Q", 1)
        + struct.pack("<Q", 2)
        + struct.pack("<f", 0.5)
        + struct.pack("<f", 0.5)
    )
    assert raw == expected
    assert len(raw) == 4 + 4 + 8 + 8 + 8


def test_binary_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    matrix = EmbeddingMatrix(rng.standard_normal((1000, 64)).astype(np.float32))
    path = tmp_path / "m.vtem"
    save_matrix(matrix, path)
    reloaded = load_matrix(path)
    assert reloaded.data.tobytes() == matrix.data.tobytes()
    save_matrix(reloaded, tmp_path / "again.vtem")
    assert (tmp_path / "again.vtem").read_bytes() == path.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "m.vtem"
    path.write_bytes(b"NOPE" + b"\x00" * 24)
    with pytest.raises(BadMagicError):
        load_matrix(path)


def test_bad_version_rejected(tmp_path):
    path = tmp_path / "m.vtem"
    path.write_bytes(b"VTEM" + struct.pack("<IQQ", 9, 1, 1) + b"\x00" * 4)
    with pytest.raises(BadVersionError):
        load_matrix(path)


def test_truncated_payload_rejected(tmp_path):
    matrix = EmbeddingMatrix(np.ones((2, 3), dtype=np.float32))
    path = tmp_path / "m.vtem"
    save_matrix(matrix, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(SizeMismatchError):
        load_matrix(path)


def test_nonfinite_payload_rejected(tmp_path):
    path = tmp_path / "m.vtem"
    payload = struct.pack("<ff", 1.0, math.nan)
    path.write_bytes(b"VTEM" + struct.pack("<IQQ", 1, 1, 2) + payload)
    with pytest.raises(NonFiniteError):
        load_matrix(path)


def test_nonfinite_construction_rejected():
    with pytest.raises(NonFiniteError):
        EmbeddingMatrix(np.array([[np.inf, 0.0]]))


def test_text_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    matrix = EmbeddingMatrix((rng.standard_normal((40, 7)) * 1e-3).astype(np.float32))
    path = tmp_path / "m.txt"
    save_matrix_text(matrix, path)
    reloaded = load_matrix_text(path)
    assert np.array_equal(reloaded.data, matrix.data)


def test_text_rejects_ragged(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 2\n3\n")
    with pytest.raises(SizeMismatchError):
        load_matrix_text(path)


def test_averaged_row_of_two_unit_vectors():
    old = EmbeddingMatrix(np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32))
    plan = _plan([InitDirective("averaged", (0, 1))])
    out = apply_transfer(plan, old)
    assert out.data.tolist() == [[0.5, 0.5]]


def test_self_transfer_identity_bytes():
    rng = np.random.default_rng(11)
    old = EmbeddingMatrix(rng.standard_normal((30, 8)).astype(np.float32))
    plan = _plan([InitDirective("matched", (i,)) for i in range(30)], mode="matched")
    out = apply_transfer(plan, old)
    assert out.to_bytes() == old.to_bytes()


def test_global_mean_fallback_value():
    old = EmbeddingMatrix(np.array([[2.0, 4.0], [0.0, 0.0]], dtype=np.float32))
    # independent mean: fsum per dimension
    expected = [
        math.fsum([2.0, 0.0]) / 2.0,
        math.fsum([4.0, 0.0]) / 2.0,
    ]
    assert expected == [1.0, 2.0]
    plan = _plan([InitDirective("fallback")])
    out = apply_transfer(plan, old, FallbackStrategy(kind="global_mean"))
    assert out.data.tolist() == [expected]


def test_zero_fallback():
    old = EmbeddingMatrix(np.ones((3, 4), dtype=np.float32))
    plan = _plan([InitDirective("fallback")])
    out = apply_transfer(plan, old, FallbackStrategy(kind="zero"))
    assert out.data.tolist() == [[0.0] * 4]


def test_random_normal_requires_seed():
    old = EmbeddingMatrix(np.ones((2, 2), dtype=np.float32))
    plan = _plan([InitDirective("fallback")])
    with pytest.raises(ValueError, match="seed"):
        apply_transfer(plan, old, FallbackStrategy(kind="random_normal"))


def test_random_normal_deterministic_and_position_keyed():
    rng = np.random.default_rng(17)
    old = EmbeddingMatrix(rng.standard_normal((10, 4)).astype(np.float32))
    strategy = FallbackStrategy(kind="random_normal", seed=99)
    plan_a = _plan(
        [
            InitDirective("fallback"),
            InitDirective("matched", (3,)),
            InitDirective("fallback"),
        ]
    )
    out_a = apply_transfer(plan_a, old, strategy)
    out_b = apply_transfer(plan_a, old, strategy)
    assert out_a.to_bytes() == out_b.to_bytes()
    # a fallback row's value depends on its index, not on how many fallback
    # directives precede it
    plan_c = _plan(
        [
            InitDirective("matched", (3,)),
            InitDirective("matched", (4,)),
            InitDirective("fallback"),
        ]
    )
    out_c = apply_transfer(plan_c, old, strategy)
    assert np.array_equal(out_c.data[2], out_a.data[2])


def test_rows_depend_only_on_their_directive():
    rng = np.random.default_rng(23)
    old = EmbeddingMatrix(rng.standard_normal((12, 5)).astype(np.float32))
    directives = [
        InitDirective("averaged", (0, 5, 7)),
        InitDirective("matched", (2,)),
        InitDirective("fallback"),
        InitDirective("averaged", (1, 1)),
    ]
    strategy = FallbackStrategy(kind="random_normal", seed=5)
    full = apply_transfer(_plan(directives), old, strategy)
    for i, directive in enumerate(directives):
        # rebuild row i in isolation, padding other slots arbitrarily
        padded = [InitDirective("matched", (0,))] * len(directives)
        padded[i] = directive
        alone = apply_transfer(_plan(padded), old, strategy)
        assert np.array_equal(alone.data[i], full.data[i])


def test_all_equal_sources_average_exactly():
    rng = np.random.default_rng(29)
    vec = rng.standard_normal(16).astype(np.float32)
    for k in (2, 3, 7, 100):
        old = EmbeddingMatrix(np.tile(vec, (k, 1)))
        plan = _plan([InitDirective("averaged", tuple(range(k)))])
        out = apply_transfer(plan, old)
        assert np.array_equal(out.data[0], vec)


def test_averaged_rows_match_fsum_reference_within_one_ulp():
    rng = np.random.default_rng(31)
    old_arr = (rng.standard_normal((50, 9)) * rng.uniform(0.1, 10)).astype(np.float32)
    old = EmbeddingMatrix(old_arr)
    sources = tuple(int(i) for i in rng.integers(0, 50, size=13))
    plan = _plan([InitDirective("averaged", sources)])
    out = apply_transfer(plan, old)
    for d in range(9):
        reference = np.float32(
            math.fsum(float(old_arr[s, d]) for s in sources) / len(sources)
        )
        got = out.data[0, d]
        assert abs(float(got) - float(reference)) <= abs(np.spacing(reference))


def test_source_out_of_range_rejected():
    old = EmbeddingMatrix(np.ones((3, 2), dtype=np.float32))
    plan = _plan([InitDirective("matched", (3,))], mode="matched")
    with pytest.raises(PlanError, match="out of range"):
        apply_transfer(plan, old)


def test_old_size_mismatch_rejected():
    old = EmbeddingMatrix(np.ones((3, 2), dtype=np.float32))
    plan = _plan([InitDirective("matched", (0,))], mode="matched", old_size=5)
    with pytest.raises(PlanError, match="5 old tokens"):
        apply_transfer(plan, old)


def test_digest_mismatch_rejected():
    old = EmbeddingMatrix(np.ones((1, 2), dtype=np.float32))
    plan = _plan([InitDirective("matched", (0,))], mode="matched")
    with pytest.raises(DigestMismatchError, match="digest"):
        apply_transfer(plan, old, expected_old_digest="f" * 64)


def test_full_plan_output_shape_and_finiteness():
    old_vocab = Vocabulary(["[UNK]", "a", "##b", "ab"])
    new_vocab = Vocabulary(["[UNK]", "ab", "abab", "zq"])
    rng = np.random.default_rng(37)
    old = EmbeddingMatrix(rng.standard_normal((4, 6)).astype(np.float32))
    plan = build_transfer_plan(new_vocab, old_vocab, "averaged")
    out = apply_transfer(plan, old)
    assert out.rows == len(new_vocab)
    assert out.dim == 6
    assert np.isfinite(out.data).all()
    # matched row is a bit-exact copy
    assert np.array_equal(out.data[1], old.data[3])
