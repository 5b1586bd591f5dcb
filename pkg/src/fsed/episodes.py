"""Episodic N-way-K-shot sampling and a synthetic dataset generator.

Sentences are grouped by the class of their single trigger; an episode draws
N event classes, K support and M query sentences per class (disjoint), and
relabels tokens episode-locally: sampled class -> 1..N, everything else -> 0.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .contrastive import EpisodeArrays
from .data import Dataset, LabelSpace, O_ID, SentenceRecord
from .errors import SamplingError, ValidationError


@dataclass
class Episode:
    support: list[SentenceRecord]   # relabeled episode-locally
    query: list[SentenceRecord]
    class_map: dict[int, int]       # episode-local 1..N -> dataset-global id
    n_classes: int
    seed_used: tuple


def _seed_ints(value):
    """Flatten a nested seed key into integers; strings hash via CRC32 so
    tags like "train" and "valid" get distinct, stable substreams."""
    if isinstance(value, str):
        return [zlib.crc32(value.encode("utf-8"))]
    if isinstance(value, (tuple, list)):
        out = []
        for item in value:
            out.extend(_seed_ints(item))
        return out
    return [int(value)]


def episode_rng(global_seed, episode_index):
    """Independent, order-free substream for one episode."""
    entropy = tuple(_seed_ints((global_seed, episode_index)))
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy)))


def _group_by_trigger_class(dataset: Dataset):
    groups = {}
    for rec in dataset.records:
        trig = rec.trigger_indices()
        if trig.size != 1:
            raise ValidationError(
                f"sentence {rec.sentence_id} has {trig.size} triggers; "
                "exactly one is required")
        groups.setdefault(int(rec.labels[trig[0]]), []).append(rec)
    return groups


def _relabel(rec: SentenceRecord, global_to_local):
    labels = np.array([global_to_local.get(int(c), 0) for c in rec.labels],
                      dtype=np.int64)
    return SentenceRecord(rec.sentence_id, rec.embeddings, labels)


def sample_episode(dataset: Dataset, n, k, m, rng,
                   seed_used=("unseeded",)) -> Episode:
    groups = _group_by_trigger_class(dataset)
    eligible = sorted(c for c, recs in groups.items() if len(recs) >= k + m)
    if len(eligible) < n:
        raise SamplingError(
            f"need {n} event classes with >= {k + m} sentences, dataset has "
            f"{len(eligible)} (of {len(groups)} classes)")
    chosen = rng.choice(np.array(eligible), size=n, replace=False)
    global_to_local = {int(c): i + 1 for i, c in enumerate(chosen)}
    support, query = [], []
    for c in chosen:
        recs = groups[int(c)]
        idx = rng.choice(len(recs), size=k + m, replace=False)
        for j in idx[:k]:
            support.append(_relabel(recs[j], global_to_local))
        for j in idx[k:]:
            query.append(_relabel(recs[j], global_to_local))
    return Episode(support, query,
                   {v: k_ for k_, v in global_to_local.items()},
                   n, seed_used)


def episode_arrays(episode: Episode) -> EpisodeArrays:
    sx = np.vstack([r.embeddings for r in episode.support])
    sy = np.concatenate([r.labels for r in episode.support])
    qx = np.vstack([r.embeddings for r in episode.query])
    qy = np.concatenate([r.labels for r in episode.query])
    return EpisodeArrays(sx, sy, qx, qy, episode.n_classes)


@dataclass
class SynthSpec:
    class_count: int = 5
    sentences_per_class: int = 20
    sentence_length: int = 12
    d_in: int = 16
    cluster_separation: float = 6.0
    o_noise_scale: float = 1.0
    overlap_fraction: float = 0.0

    def __post_init__(self):
        if min(self.class_count, self.sentences_per_class,
               self.sentence_length, self.d_in) < 1:
            raise ValidationError("SynthSpec counts must be positive")
        if self.cluster_separation < 0 or self.o_noise_scale < 0:
            raise ValidationError("SynthSpec scales must be non-negative")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise ValidationError("overlap_fraction must be in [0, 1]")


# Trigger clusters are tight relative to their separation so that class
# structure survives the O-noise; the ratio is fixed, not configurable.
_TRIGGER_STD_FRACTION = 0.1


def _class_centers(spec: SynthSpec, rng):
    centers = rng.normal(size=(spec.class_count, spec.d_in))
    if spec.class_count > 1:
        diffs = centers[:, None, :] - centers[None, :, :]
        dists = np.sqrt(np.sum(diffs * diffs, axis=2))
        min_dist = dists[~np.eye(spec.class_count, dtype=bool)].min()
        factor = spec.cluster_separation / min_dist if min_dist > 0 else 0.0
        centers = centers * factor
    else:
        centers = centers * spec.cluster_separation
    return centers


def synth_dataset(spec: SynthSpec, seed, split="train",
                  name_prefix="Event") -> Dataset:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed,))))
    centers = _class_centers(spec, rng)
    trigger_std = _TRIGGER_STD_FRACTION * spec.cluster_separation
    names = ["O"] + [f"{name_prefix}{split.capitalize()}{i:03d}"
                     for i in range(spec.class_count)]
    records = []
    sid = 0
    for c in range(spec.class_count):
        for _ in range(spec.sentences_per_class):
            n = spec.sentence_length
            emb = rng.normal(size=(n, spec.d_in)) * spec.o_noise_scale
            labels = np.zeros(n, dtype=np.int64)
            # overlap O tokens sit near a random event center to stress TAT
            n_overlap = int(round(spec.overlap_fraction * (n - 1)))
            if n_overlap > 0:
                which = rng.choice(n, size=n_overlap, replace=False)
                near = rng.integers(0, spec.class_count, size=n_overlap)
                emb[which] = centers[near] + rng.normal(
                    scale=trigger_std, size=(n_overlap, spec.d_in))
            trig = int(rng.integers(0, n))
            emb[trig] = centers[c] + rng.normal(scale=trigger_std,
                                                size=spec.d_in)
            labels[trig] = c + 1
            # keep the stored file float32-exact so round-trips are identity
            emb = emb.astype(np.float32).astype(np.float64)
            records.append(SentenceRecord(sid, emb, labels))
            sid += 1
    return Dataset(LabelSpace(names), records, split=split, dim=spec.d_in)
