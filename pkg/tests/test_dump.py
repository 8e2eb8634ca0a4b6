"""Binary dump format: round trips, determinism, and fail-closed validation."""

import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from typicalset import (
    BnChannelStats,
    DataError,
    DumpCorruptionError,
    DumpFormatError,
    FeatureBatch,
    LinearHead,
    Stage,
    read_dump,
    write_dump,
)


def f32(values):
    return np.asarray(values, dtype=np.float32).astype(np.float64)


@pytest.fixture
def full_dump(tmp_path, rng):
    n, d, k = 7, 3, 4
    batch = FeatureBatch(
        f32(rng.normal(size=(n, d))),
        Stage.PRE_ACTIVATION,
        labels=rng.integers(0, k, size=n),
    )
    stats = BnChannelStats(f32(rng.normal(size=d)), f32(rng.uniform(0.5, 2.0, size=d)))
    head = LinearHead(f32(rng.normal(size=(k, d))), f32(rng.normal(size=k)))
    path = tmp_path / "full.batsdump"
    write_dump(path, batch, stats, head)
    return path, batch, stats, head


def test_round_trip_bit_exact(full_dump):
    path, batch, stats, head = full_dump
    got_batch, got_stats, got_head = read_dump(path)
    np.testing.assert_array_equal(got_batch.data, batch.data)
    np.testing.assert_array_equal(got_batch.labels, batch.labels)
    assert got_batch.stage is batch.stage
    np.testing.assert_array_equal(got_stats.mu, stats.mu)
    np.testing.assert_array_equal(got_stats.sigma, stats.sigma)
    np.testing.assert_array_equal(got_head.weights, head.weights)
    np.testing.assert_array_equal(got_head.bias, head.bias)


def test_write_is_deterministic(full_dump, tmp_path):
    path, batch, stats, head = full_dump
    other = tmp_path / "copy.batsdump"
    write_dump(other, batch, stats, head)
    assert path.read_bytes() == other.read_bytes()


def test_rewrite_of_read_dump_is_byte_identical(full_dump, tmp_path):
    path, *_ = full_dump
    batch, stats, head = read_dump(path)
    out = tmp_path / "rewrite.batsdump"
    write_dump(out, batch, stats, head)
    assert out.read_bytes() == path.read_bytes()


def test_minimal_dump_without_optional_sections(tmp_path):
    batch = FeatureBatch(f32([[1.0, 2.0], [3.0, 4.0]]), Stage.POST_ACTIVATION)
    path = tmp_path / "plain.batsdump"
    write_dump(path, batch)
    got, stats, head = read_dump(path)
    assert stats is None and head is None and got.labels is None
    assert got.stage is Stage.POST_ACTIVATION
    np.testing.assert_array_equal(got.data, batch.data)


def test_magic_and_version_in_preamble(full_dump):
    path, *_ = full_dump
    blob = path.read_bytes()
    assert blob[:8] == b"BATSDUMP"
    assert struct.unpack_from("<I", blob, 8)[0] == 1


def test_truncated_file_fails_closed(full_dump):
    path, *_ = full_dump
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(DumpCorruptionError):
        read_dump(path)


def test_trailing_garbage_fails_closed(full_dump):
    path, *_ = full_dump
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(DumpCorruptionError):
        read_dump(path)


def test_bad_magic_reports_offset(full_dump):
    path, *_ = full_dump
    blob = bytearray(path.read_bytes())
    blob[:8] = b"NOTADUMP"
    path.write_bytes(bytes(blob))
    with pytest.raises(DumpFormatError, match="offset 0"):
        read_dump(path)


def test_unsupported_version_names_accepted_versions(full_dump):
    path, *_ = full_dump
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, 8, 2)
    path.write_bytes(bytes(blob))
    with pytest.raises(DumpFormatError, match="accepts version 1"):
        read_dump(path)


def test_nan_payload_names_first_offending_index(tmp_path):
    batch = FeatureBatch(f32([[1.0, 2.0]]), Stage.PRE_ACTIVATION)
    path = tmp_path / "nan.batsdump"
    write_dump(path, batch)
    blob = bytearray(path.read_bytes())
    # overwrite features[1] with a NaN, bypassing the writer's checks
    header_len = struct.unpack_from("<I", blob, 12)[0]
    offset = 16 + header_len + 4
    struct.pack_into("<f", blob, offset, float("nan"))
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError, match=r"features.*index 1"):
        read_dump(path)


def test_writer_refuses_zero_sigma(tmp_path):
    batch = FeatureBatch(f32([[1.0]]), Stage.PRE_ACTIVATION)
    # sigma positive in float64 but rounding to zero in float32 must be refused
    with pytest.raises(DataError, match="sigma"):
        write_dump(tmp_path / "x.batsdump", batch, BnChannelStats([0.0], [1e-60]))


def test_reader_rejects_nonpositive_sigma(tmp_path):
    batch = FeatureBatch(f32([[1.0]]), Stage.PRE_ACTIVATION)
    path = tmp_path / "sig.batsdump"
    write_dump(path, batch, BnChannelStats([0.0], [1.0]))
    blob = bytearray(path.read_bytes())
    header_len = struct.unpack_from("<I", blob, 12)[0]
    sigma_offset = 16 + header_len + 4 + 4  # features, bn_mu, then bn_sigma
    struct.pack_into("<f", blob, sigma_offset, -1.0)
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="positive"):
        read_dump(path)


def test_header_is_length_prefixed_json(full_dump):
    path, *_ = full_dump
    blob = path.read_bytes()
    header_len = struct.unpack_from("<I", blob, 12)[0]
    header = json.loads(blob[16 : 16 + header_len])
    assert header["n"] == 7 and header["d"] == 3 and header["k"] == 4
    assert header["has_bn"] and header["has_head"] and header["has_labels"]
    assert header["stage"] == "pre"


def test_header_size_lie_is_corruption(full_dump):
    path, *_ = full_dump
    blob = bytearray(path.read_bytes())
    header_len = struct.unpack_from("<I", blob, 12)[0]
    header = json.loads(bytes(blob[16 : 16 + header_len]))
    header["n"] = 9  # declared sizes no longer match the payload
    new_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    struct.pack_into("<I", blob, 12, len(new_header))
    path.write_bytes(bytes(blob[:16]) + new_header + bytes(blob[16 + header_len :]))
    with pytest.raises(DumpCorruptionError):
        read_dump(path)


def test_not_a_dump_at_all(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"hello")
    with pytest.raises(DumpCorruptionError):
        read_dump(path)


@settings(max_examples=25, deadline=None)
@given(
    hnp.arrays(
        np.float32,
        st.tuples(st.integers(1, 6), st.integers(1, 5)),
        elements=st.floats(-1e6, 1e6, width=32),
    ),
    st.booleans(),
)
def test_round_trip_property(tmp_path_factory, values, post_stage):
    stage = Stage.POST_ACTIVATION if post_stage else Stage.PRE_ACTIVATION
    batch = FeatureBatch(values.astype(np.float64), stage)
    path = tmp_path_factory.mktemp("dumps") / "prop.batsdump"
    write_dump(path, batch)
    got, _, _ = read_dump(path)
    np.testing.assert_array_equal(got.data, batch.data)
    assert got.stage is stage
