"""Binary feature-dump file format.

Layout, all multi-byte values little-endian::

    bytes 0..8    magic  b"BATSDUMP"
    bytes 8..12   u32 format version (currently 1)
    bytes 12..16  u32 header length
    ...           UTF-8 JSON header (sorted keys, compact separators)
    ...           payload sections, in this fixed order:
                    features   N*d float32, row-major
                    bn_mu      d   float32        (if has_bn)
                    bn_sigma   d   float32        (if has_bn)
                    head_w     K*d float32, row-major  (if has_head)
                    head_b     K   float32        (if has_head)
                    labels     N   int32          (if has_labels)

The header records shapes and presence flags; the reader validates magic,
version, header consistency and that the declared sizes match the actual
byte count exactly before touching any payload, so truncated or padded files
fail closed. Payload precision is float32: arrays are converted on write, and
writing a batch that came from a dump reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, DumpCorruptionError, DumpFormatError
from .model import BnChannelStats, FeatureBatch, LinearHead, Stage

MAGIC = b"BATSDUMP"
VERSION = 1
_CREATOR = "typicalset/0.1.0"

_STAGE_FLAGS = {Stage.PRE_ACTIVATION: "pre", Stage.POST_ACTIVATION: "post"}
_FLAG_STAGES = {v: k for k, v in _STAGE_FLAGS.items()}


def _f32(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype="<f4")


def _section_finite(arr: np.ndarray, name: str) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        idx = int(np.flatnonzero(~finite.ravel())[0])
        raise DataError(f"{name} contains a non-finite value at flat index {idx}")


def write_dump(
    path,
    batch: FeatureBatch,
    stats: BnChannelStats | None = None,
    head: LinearHead | None = None,
) -> None:
    """Serialize a batch (and optional statistics / head) to ``path``.

    Output bytes are a pure function of the inputs: two writes of the same
    structures produce identical files.
    """
    n, d = batch.data.shape
    if stats is not None and stats.n_channels != d:
        raise DataError(f"stats have {stats.n_channels} channels, batch has {d}")
    if head is not None and head.n_channels != d:
        raise DataError(f"head expects {head.n_channels} channels, batch has {d}")
    if head is not None:
        k = head.n_classes
    elif batch.labels is not None:
        k = int(batch.labels.max()) + 1
    else:
        k = 0
    if batch.labels is not None and k and int(batch.labels.max()) >= k:
        raise DataError("labels out of range for the head's class count")
    header = {
        "version": VERSION,
        "n": n,
        "d": d,
        "k": k,
        "stage": _STAGE_FLAGS[batch.stage],
        "has_labels": batch.labels is not None,
        "has_bn": stats is not None,
        "has_head": head is not None,
        "creator": _CREATOR,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    sections: list[bytes] = [_f32(batch.data).tobytes()]
    if stats is not None:
        sections.append(_f32(stats.mu).tobytes())
        sigma32 = _f32(stats.sigma)
        if (sigma32 <= 0).any():  # float32 rounding could squash tiny sigmas
            raise DataError("bn_sigma must remain positive at float32 precision")
        sections.append(sigma32.tobytes())
    if head is not None:
        sections.append(_f32(head.weights).tobytes())
        sections.append(_f32(head.bias).tobytes())
    if batch.labels is not None:
        sections.append(np.ascontiguousarray(batch.labels, dtype="<i4").tobytes())
    blob = b"".join(
        [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header_bytes)), header_bytes]
        + sections
    )
    Path(path).write_bytes(blob)


def _expected_sections(header: dict) -> list[tuple[str, str, int]]:
    n, d, k = header["n"], header["d"], header["k"]
    sections = [("features", "<f4", n * d)]
    if header["has_bn"]:
        sections += [("bn_mu", "<f4", d), ("bn_sigma", "<f4", d)]
    if header["has_head"]:
        sections += [("head_w", "<f4", k * d), ("head_b", "<f4", k)]
    if header["has_labels"]:
        sections.append(("labels", "<i4", n))
    return sections


def read_dump(path) -> tuple[FeatureBatch, BnChannelStats | None, LinearHead | None]:
    """Parse a dump file, validating every header invariant before returning.

    Round-trips :func:`write_dump` output bit-exactly. Structural problems
    raise :class:`DumpFormatError` (with the byte offset), size mismatches
    raise :class:`DumpCorruptionError`, and non-finite payloads raise
    :class:`DataError` naming the first offending index.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise DumpCorruptionError(f"file too short ({len(blob)} bytes) for a dump preamble")
    if blob[:8] != MAGIC:
        raise DumpFormatError(f"bad magic {blob[:8]!r}, expected {MAGIC!r}", offset=0)
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise DumpFormatError(
            f"unsupported format version {version}; this reader accepts version {VERSION}",
            offset=8,
        )
    (header_len,) = struct.unpack_from("<I", blob, 12)
    if 16 + header_len > len(blob):
        raise DumpCorruptionError(
            f"declared header length {header_len} exceeds file size", offset=12
        )
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DumpFormatError(f"header is not valid UTF-8 JSON: {exc}", offset=16) from exc
    required = {"version", "n", "d", "k", "stage", "has_labels", "has_bn", "has_head"}
    missing = required - header.keys()
    if missing:
        raise DumpFormatError(f"header missing fields {sorted(missing)}", offset=16)
    if header["version"] != version:
        raise DumpFormatError(
            f"header version {header['version']} disagrees with preamble version {version}",
            offset=16,
        )
    if header["stage"] not in _FLAG_STAGES:
        raise DumpFormatError(f"unknown stage flag {header['stage']!r}", offset=16)
    n, d, k = header["n"], header["d"], header["k"]
    if not (isinstance(n, int) and isinstance(d, int) and isinstance(k, int)) or n < 1 or d < 1 or k < 0:
        raise DumpFormatError(f"invalid dimensions n={n} d={d} k={k}", offset=16)
    if header["has_head"] and k < 2:
        raise DumpFormatError(f"head present but k={k} < 2", offset=16)

    sections = _expected_sections(header)
    itemsize = 4
    expected_payload = sum(count * itemsize for _, _, count in sections)
    actual_payload = len(blob) - 16 - header_len
    if actual_payload != expected_payload:
        raise DumpCorruptionError(
            f"payload is {actual_payload} bytes but header declares {expected_payload}",
            offset=16 + header_len,
        )
    offset = 16 + header_len
    arrays: dict[str, np.ndarray] = {}
    for name, dtype, count in sections:
        arrays[name] = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
        offset += count * itemsize
        if dtype == "<f4":
            _section_finite(arrays[name], name)

    features = arrays["features"].astype(np.float64).reshape(n, d)
    labels = None
    if header["has_labels"]:
        labels = arrays["labels"].astype(np.int64)
        if labels.min(initial=0) < 0 or (k and labels.max(initial=-1) >= k):
            raise DataError(f"labels out of range [0, {k})")
    batch = FeatureBatch(features, _FLAG_STAGES[header["stage"]], labels)
    stats = None
    if header["has_bn"]:
        sigma = arrays["bn_sigma"].astype(np.float64)
        if (sigma <= 0).any():
            idx = int(np.flatnonzero(sigma <= 0)[0])
            raise DataError(f"bn_sigma[{idx}] = {sigma[idx]} must be positive")
        stats = BnChannelStats(arrays["bn_mu"].astype(np.float64), sigma)
    head = None
    if header["has_head"]:
        head = LinearHead(
            arrays["head_w"].astype(np.float64).reshape(k, d),
            arrays["head_b"].astype(np.float64),
        )
    return batch, stats, head
