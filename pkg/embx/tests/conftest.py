import json

import pytest
import torch
from transformers import BertConfig, BertModel

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "troops", "attacked", "city", "at", "dawn", "a", "fire",
    "started", "in", "market", "un", "##hap", "##pi", "##ness", "spread",
    "meeting", "ended", "early", "word",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small random-weights masked LM saved to disk, so exports exercise
    the real tokenizer/model loading path without network access."""
    path = tmp_path_factory.mktemp("tiny-model")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    (path / "tokenizer_config.json").write_text(json.dumps(
        {"tokenizer_class": "BertTokenizer", "do_lower_case": True}))

    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=128)
    BertModel(config).save_pretrained(str(path))
    return str(path)
