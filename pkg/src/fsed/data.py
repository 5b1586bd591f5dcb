"""Dataset model and the EMB1 binary embedding-file format.

EMB1 layout (all integers little-endian):
    magic "EMB1" | version u32=1 | d u32 | label_count u32
    | per label: u16 byte-length + UTF-8 name (index 0 must be "O")
    | sentence_count u64
    | per sentence: id u64, n u32, n label ids u32, n*d float32 row-major

Embeddings are float32 on disk and widened to float64 in memory; widening
then narrowing is exact, so write(load(f)) reproduces f byte-for-byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagicError, LabelRangeError, NonFiniteValueError,
                     TruncatedRecordError, ValidationError)

MAGIC = b"EMB1"
VERSION = 1
O_LABEL = "O"
O_ID = 0


@dataclass
class LabelSpace:
    names: list[str]

    def __post_init__(self):
        if not self.names or self.names[0] != O_LABEL:
            raise ValidationError("label space index 0 must be 'O'")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("label names must be unique")

    def __len__(self):
        return len(self.names)

    def event_ids(self):
        return list(range(1, len(self.names)))


@dataclass
class SentenceRecord:
    sentence_id: int
    embeddings: np.ndarray  # n x d float64
    labels: np.ndarray      # n int64, dataset-global ids

    @property
    def n(self):
        return self.embeddings.shape[0]

    def trigger_indices(self):
        return np.nonzero(self.labels != O_ID)[0]


@dataclass
class Dataset:
    label_space: LabelSpace
    records: list[SentenceRecord]
    split: str = "train"
    dim: int = 0

    def __post_init__(self):
        if self.dim == 0 and self.records:
            self.dim = self.records[0].embeddings.shape[1]
        self.validate()

    def validate(self):
        n_labels = len(self.label_space)
        for rec in self.records:
            if rec.n < 1:
                raise ValidationError(f"sentence {rec.sentence_id} is empty")
            if rec.embeddings.shape != (rec.n, self.dim):
                raise ValidationError(
                    f"sentence {rec.sentence_id}: embedding shape "
                    f"{rec.embeddings.shape} != ({rec.n}, {self.dim})")
            if rec.labels.shape != (rec.n,):
                raise ValidationError(
                    f"sentence {rec.sentence_id}: {rec.labels.shape[0]} labels "
                    f"for {rec.n} tokens")
            if np.any(rec.labels < 0) or np.any(rec.labels >= n_labels):
                raise ValidationError(
                    f"sentence {rec.sentence_id}: label id out of range")
            if not np.all(np.isfinite(rec.embeddings)):
                raise ValidationError(
                    f"sentence {rec.sentence_id}: non-finite embedding")


@dataclass
class DatasetStats:
    class_count: int
    trigger_count: int
    avg_sentence_length: float


def dataset_stats(dataset: Dataset) -> DatasetStats:
    classes = set()
    triggers = 0
    tokens = 0
    for rec in dataset.records:
        tokens += rec.n
        non_o = rec.labels[rec.labels != O_ID]
        triggers += non_o.size
        classes.update(int(c) for c in non_o)
    avg = tokens / len(dataset.records) if dataset.records else 0.0
    return DatasetStats(len(classes), triggers, avg)


def _need(buf, offset, size, what, path):
    if offset + size > len(buf):
        raise TruncatedRecordError(f"truncated {what}", offset=offset, path=path)
    return offset + size


def load_emb1(path) -> Dataset:
    with open(path, "rb") as f:
        buf = f.read()
    off = 0
    _need(buf, off, 4, "magic", path)
    if buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}", offset=0, path=path)
    off = 4
    off = _need(buf, off, 12, "header", path)
    version, d, label_count = struct.unpack_from("<III", buf, 4)
    if version != VERSION:
        raise BadMagicError(f"unsupported version {version}", offset=4, path=path)

    names = []
    for _ in range(label_count):
        start = off
        off = _need(buf, off, 2, "label length", path)
        (length,) = struct.unpack_from("<H", buf, start)
        off = _need(buf, off, length, "label name", path)
        names.append(buf[start + 2: start + 2 + length].decode("utf-8"))
    if not names or names[0] != O_LABEL:
        raise BadMagicError("label index 0 is not 'O'", offset=16, path=path)

    start = off
    off = _need(buf, off, 8, "sentence count", path)
    (count,) = struct.unpack_from("<Q", buf, start)

    records = []
    for _ in range(count):
        start = off
        off = _need(buf, off, 12, "sentence header", path)
        sid, n = struct.unpack_from("<QI", buf, start)
        lab_off = off
        off = _need(buf, off, 4 * n, "label ids", path)
        labels = np.frombuffer(buf, dtype="<u4", count=n, offset=lab_off).astype(np.int64)
        if np.any(labels >= label_count):
            raise LabelRangeError(f"label id out of range in sentence {sid}",
                                  offset=lab_off, path=path)
        emb_off = off
        off = _need(buf, off, 4 * n * d, "embedding row", path)
        emb = np.frombuffer(buf, dtype="<f4", count=n * d, offset=emb_off)
        if not np.all(np.isfinite(emb)):
            raise NonFiniteValueError(f"non-finite embedding in sentence {sid}",
                                      offset=emb_off, path=path)
        records.append(SentenceRecord(sid, emb.astype(np.float64).reshape(n, d),
                                      labels))
    if off != len(buf):
        raise TruncatedRecordError("trailing bytes after last sentence",
                                   offset=off, path=path)
    return Dataset(LabelSpace(names), records, dim=d)


def write_emb1(dataset: Dataset, path) -> None:
    dataset.validate()
    parts = [MAGIC,
             struct.pack("<III", VERSION, dataset.dim, len(dataset.label_space))]
    for name in dataset.label_space.names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(struct.pack("<Q", len(dataset.records)))
    for rec in dataset.records:
        parts.append(struct.pack("<QI", rec.sentence_id, rec.n))
        parts.append(rec.labels.astype("<u4").tobytes())
        parts.append(rec.embeddings.astype("<f4").tobytes())
    try:
        with open(path, "wb") as f:
            f.write(b"".join(parts))
    except OSError as exc:
        raise OSError(f"failed writing EMB1 file {path}: {exc}") from exc


def check_corpus_disjoint(train: Dataset, valid: Dataset, test: Dataset) -> None:
    """Splits must not share any event-type name."""
    sets = []
    for ds in (train, valid, test):
        present = set()
        for rec in ds.records:
            present.update(ds.label_space.names[int(c)]
                           for c in rec.labels if c != O_ID)
        sets.append((ds.split, present))
    for i, (a, sa) in enumerate(sets):
        for b, sb in sets[i + 1:]:
            shared = sa & sb
            if shared:
                raise ValidationError(
                    f"splits {a} and {b} share event types {sorted(shared)}")
