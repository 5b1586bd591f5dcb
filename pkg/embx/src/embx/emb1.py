"""Minimal EMB1 writer.

Byte layout (little-endian): magic "EMB1" | version u32=1 | d u32
| label_count u32 | per label u16 byte-length + UTF-8 name ("O" at index 0)
| sentence_count u64 | per sentence: id u64, token count u32, token labels
u32 each, then token-count x d float32 embeddings row-major.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EMB1"
VERSION = 1


def write_emb1(path, labels, sentences, dim):
    """sentences: iterable of (sentence_id, label_ids, embeddings) with
    embeddings as an (n, dim) array; written as float32."""
    if not labels or labels[0] != "O":
        raise ValueError("label index 0 must be 'O'")
    parts = [MAGIC, struct.pack("<III", VERSION, dim, len(labels))]
    for name in labels:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    body = []
    count = 0
    for sid, label_ids, emb in sentences:
        emb = np.asarray(emb)
        if emb.shape != (len(label_ids), dim):
            raise ValueError(f"sentence {sid}: embedding shape {emb.shape} "
                             f"!= ({len(label_ids)}, {dim})")
        if not np.all(np.isfinite(emb)):
            raise ValueError(f"sentence {sid}: non-finite embedding")
        body.append(struct.pack("<QI", sid, len(label_ids)))
        body.append(np.asarray(label_ids, dtype="<u4").tobytes())
        body.append(emb.astype("<f4").tobytes())
        count += 1
    parts.append(struct.pack("<Q", count))
    parts.extend(body)
    with open(path, "wb") as f:
        f.write(b"".join(parts))
