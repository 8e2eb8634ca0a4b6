"""Writer for the feature-dump interchange format.

Implements the byte layout the downstream tooling consumes: magic
``BATSDUMP``, little-endian u32 version (1), a length-prefixed JSON header,
then float32/int32 payload sections in fixed order (features, bn_mu,
bn_sigma, head_w, head_b, labels). Implemented here independently so this
package talks to the consumer only through the file format.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BATSDUMP"
VERSION = 1
_CREATOR = "typicalset-exporter/0.1.0"


def write_feature_dump(
    path,
    features: np.ndarray,
    stage: str = "pre",
    labels: np.ndarray | None = None,
    bn_mu: np.ndarray | None = None,
    bn_sigma: np.ndarray | None = None,
    head_w: np.ndarray | None = None,
    head_b: np.ndarray | None = None,
) -> None:
    features = np.ascontiguousarray(features, dtype="<f4")
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise ValueError(f"features must be a nonempty 2-D array, got {features.shape}")
    if not np.isfinite(features).all():
        raise ValueError("features contain non-finite values")
    if stage not in ("pre", "post"):
        raise ValueError(f"stage must be 'pre' or 'post', got {stage!r}")
    n, d = features.shape
    has_bn = bn_mu is not None
    if has_bn != (bn_sigma is not None):
        raise ValueError("bn_mu and bn_sigma must be given together")
    has_head = head_w is not None
    if has_head != (head_b is not None):
        raise ValueError("head_w and head_b must be given together")

    sections: list[bytes] = [features.tobytes()]
    k = 0
    if has_bn:
        mu = np.ascontiguousarray(bn_mu, dtype="<f4")
        sigma = np.ascontiguousarray(bn_sigma, dtype="<f4")
        if mu.shape != (d,) or sigma.shape != (d,):
            raise ValueError("bn arrays must have one entry per channel")
        if (sigma <= 0).any():
            raise ValueError("bn_sigma entries must be strictly positive")
        sections += [mu.tobytes(), sigma.tobytes()]
    if has_head:
        w = np.ascontiguousarray(head_w, dtype="<f4")
        b = np.ascontiguousarray(head_b, dtype="<f4")
        if w.ndim != 2 or w.shape[1] != d or b.shape != (w.shape[0],):
            raise ValueError(f"head shapes {w.shape}/{b.shape} incompatible with d={d}")
        k = w.shape[0]
        sections += [w.tobytes(), b.tobytes()]
    if labels is not None:
        lab = np.ascontiguousarray(labels, dtype="<i4")
        if lab.shape != (n,):
            raise ValueError("labels must have one entry per sample")
        if k == 0:
            k = int(lab.max()) + 1 if lab.size else 0
        if lab.min(initial=0) < 0 or (k and lab.max(initial=-1) >= k):
            raise ValueError(f"labels out of range [0, {k})")
        sections.append(lab.tobytes())

    header = {
        "version": VERSION,
        "n": n,
        "d": d,
        "k": k,
        "stage": stage,
        "has_labels": labels is not None,
        "has_bn": has_bn,
        "has_head": has_head,
        "creator": _CREATOR,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    Path(path).write_bytes(
        b"".join(
            [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header_bytes)),
             header_bytes, *sections]
        )
    )
