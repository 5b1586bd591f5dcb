"""Task-adaptive threshold: the per-episode mean probability of the O class
over all query tokens, used to veto low-confidence event predictions."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .protonet import ProbMatrix


def compute_threshold(prob_matrix: ProbMatrix) -> float:
    probs = prob_matrix.probs
    if probs.shape[0] == 0:
        raise ValidationError("cannot compute threshold on an empty query set")
    return float(np.mean(probs[:, 0]))


def predict_with_threshold(prob_matrix: ProbMatrix, threshold: float):
    """Per row: event classes with P >= threshold stay viable; prediction is
    the argmax over viable plus O (lowest index wins ties), or O outright
    when nothing is viable."""
    probs = prob_matrix.probs
    out = np.zeros(probs.shape[0], dtype=np.int64)
    for i, row in enumerate(probs):
        viable = np.nonzero(row[1:] >= threshold)[0] + 1
        if viable.size == 0:
            continue
        candidates = np.concatenate([[0], viable])
        out[i] = candidates[np.argmax(row[candidates])]
    return out


def predict_argmax(prob_matrix: ProbMatrix):
    """Plain row argmax (threshold disabled); ties break to the lowest index."""
    return np.argmax(prob_matrix.probs, axis=1).astype(np.int64)
