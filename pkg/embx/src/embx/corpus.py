"""Annotated corpus model: JSON-lines records of tokenized sentences with a
single trigger annotation each.

Record shape: {"id": int, "tokens": [str], "trigger_index": int,
"event_type": str, "split": "train"|"valid"|"test"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass

SPLITS = ("train", "valid", "test")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus records."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass
class AnnotatedSentence:
    sentence_id: int
    tokens: list[str]
    trigger_index: int
    event_type: str
    split: str


def parse_record(raw: dict, line=None) -> AnnotatedSentence:
    for key in ("id", "tokens", "trigger_index", "event_type", "split"):
        if key not in raw:
            raise CorpusError(f"missing field {key!r}", line)
    tokens = raw["tokens"]
    if not isinstance(tokens, list) or not tokens \
            or not all(isinstance(t, str) and t for t in tokens):
        raise CorpusError("tokens must be a non-empty list of non-empty "
                          "strings", line)
    trigger = raw["trigger_index"]
    if not isinstance(trigger, int) or not 0 <= trigger < len(tokens):
        raise CorpusError(f"trigger_index {trigger!r} out of range for "
                          f"{len(tokens)} tokens", line)
    event = raw["event_type"]
    if not isinstance(event, str) or not event or event == "O":
        raise CorpusError(f"invalid event_type {event!r}", line)
    if raw["split"] not in SPLITS:
        raise CorpusError(f"split must be one of {SPLITS}, got "
                          f"{raw['split']!r}", line)
    return AnnotatedSentence(int(raw["id"]), list(tokens), trigger, event,
                             raw["split"])


def load_corpus(path) -> list[AnnotatedSentence]:
    sentences = []
    seen_ids = set()
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc}", line_no) from exc
            rec = parse_record(raw, line_no)
            if rec.sentence_id in seen_ids:
                raise CorpusError(f"duplicate sentence id {rec.sentence_id}",
                                  line_no)
            seen_ids.add(rec.sentence_id)
            sentences.append(rec)
    if not sentences:
        raise CorpusError(f"corpus {path} contains no records")
    return sentences


def split_corpus(sentences):
    """Partition by split tag; a split may be empty."""
    out = {s: [] for s in SPLITS}
    for rec in sentences:
        out[rec.split].append(rec)
    return out


def label_space_for(sentences) -> list[str]:
    """Label names for one split: "O" first, event types sorted."""
    return ["O"] + sorted({rec.event_type for rec in sentences})
