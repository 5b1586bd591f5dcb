"""Word-level features from a pretrained masked language model.

Each word gets the arithmetic mean of its sub-token final-layer hidden
states. Input is truncated at a fixed sub-token budget (128 including
special tokens); words that lose all their sub-tokens to truncation are
dropped, and a sentence whose trigger word was dropped is reported so the
caller can skip it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

log = logging.getLogger("embx")

MAX_SUBTOKENS = 128


@dataclass
class EncodedSentence:
    vectors: np.ndarray     # surviving-word count x hidden size, float32
    kept_words: int         # words that survived truncation


class WordEncoder:
    def __init__(self, model_name, device="cpu"):
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.to(device)
        self.model.eval()   # determinism: no dropout
        self.device = device
        self.dim = int(self.model.config.hidden_size)

    @torch.no_grad()
    def encode(self, words: list[str]) -> EncodedSentence:
        enc = self.tokenizer(words, is_split_into_words=True,
                             truncation=True, max_length=MAX_SUBTOKENS,
                             return_tensors="pt")
        word_ids = enc.word_ids(0)
        out = self.model(**{k: v.to(self.device) for k, v in enc.items()})
        hidden = out.last_hidden_state[0].cpu().numpy().astype(np.float32)

        groups: dict[int, list[int]] = {}
        for pos, wid in enumerate(word_ids):
            if wid is not None:
                groups.setdefault(wid, []).append(pos)
        kept = sorted(groups)
        # truncation can only drop whole suffixes of the word sequence
        vectors = np.stack([hidden[groups[w]].mean(axis=0) for w in kept]) \
            if kept else np.zeros((0, self.dim), dtype=np.float32)
        return EncodedSentence(vectors, len(kept))
