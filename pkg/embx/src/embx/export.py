"""Corpus-to-EMB1 export driver."""

from __future__ import annotations

import logging
import os

from .corpus import SPLITS, label_space_for, load_corpus, split_corpus
from .emb1 import write_emb1
from .encoder import WordEncoder

log = logging.getLogger("embx")


def export(corpus_path, model_name, out_dir, device="cpu") -> dict:
    """Export one JSON-lines corpus into train/valid/test EMB1 files.

    Returns {split: {"path", "sentences", "skipped"}}. Sentences whose
    trigger word falls beyond the sub-token truncation budget are skipped
    with a warning rather than silently mislabeled.
    """
    sentences = load_corpus(corpus_path)
    encoder = WordEncoder(model_name, device=device)
    os.makedirs(out_dir, exist_ok=True)

    report = {}
    by_split = split_corpus(sentences)
    for split in SPLITS:
        recs = by_split[split]
        if not recs:
            continue
        labels = label_space_for(recs)
        label_id = {name: i for i, name in enumerate(labels)}
        rows = []
        skipped = 0
        for rec in recs:
            encoded = encoder.encode(rec.tokens)
            if rec.trigger_index >= encoded.kept_words:
                log.warning(
                    "skipping sentence %d (%s): trigger at %d but only %d "
                    "words survive truncation", rec.sentence_id, split,
                    rec.trigger_index, encoded.kept_words)
                skipped += 1
                continue
            ids = [0] * encoded.kept_words
            ids[rec.trigger_index] = label_id[rec.event_type]
            rows.append((rec.sentence_id, ids, encoded.vectors))
        path = os.path.join(out_dir, f"{split}.emb1")
        write_emb1(path, labels, rows, encoder.dim)
        report[split] = {"path": path, "sentences": len(rows),
                         "skipped": skipped}
    return report
