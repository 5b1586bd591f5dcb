import json

import numpy as np
import pytest
import torch

from embx.cli import run
from embx.encoder import WordEncoder
from embx.export import export

from fsed.data import dataset_stats, load_emb1


def write_corpus(tmp_path, records, name="corpus.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def sample_records():
    return [
        {"id": 0, "tokens": ["the", "troops", "attacked", "the", "city"],
         "trigger_index": 2, "event_type": "Attack", "split": "train"},
        {"id": 1, "tokens": ["a", "fire", "started", "in", "the", "market"],
         "trigger_index": 2, "event_type": "Fire", "split": "train"},
        {"id": 2, "tokens": ["unhappiness", "spread", "at", "dawn"],
         "trigger_index": 1, "event_type": "Spread", "split": "valid"},
        {"id": 3, "tokens": ["the", "meeting", "ended", "early"],
         "trigger_index": 2, "event_type": "End", "split": "test"},
        {"id": 4, "tokens": ["the", "city", "meeting", "ended"],
         "trigger_index": 3, "event_type": "End", "split": "test"},
    ]


def test_single_sentence_shape(tmp_path, tiny_model_dir):
    corpus = write_corpus(tmp_path, [sample_records()[0]])
    report = export(corpus, tiny_model_dir, tmp_path / "out")
    assert list(report) == ["train"]
    ds = load_emb1(report["train"]["path"])
    assert len(ds.records) == 1
    assert ds.dim == 16  # tiny model hidden size
    assert ds.records[0].n == 5
    assert ds.records[0].trigger_indices().tolist() == [2]


def test_export_loads_cleanly_and_counts_match(tmp_path, tiny_model_dir):
    corpus = write_corpus(tmp_path, sample_records())
    report = export(corpus, tiny_model_dir, tmp_path / "out")
    assert set(report) == {"train", "valid", "test"}

    # loads in the engine with zero validation errors
    train = load_emb1(report["train"]["path"])
    test = load_emb1(report["test"]["path"])

    # corpus-level class and trigger counts match the engine's stats
    s = dataset_stats(train)
    assert s.class_count == 2         # Attack, Fire
    assert s.trigger_count == 2
    assert train.label_space.names == ["O", "Attack", "Fire"]

    s = dataset_stats(test)
    assert s.class_count == 1         # End
    assert s.trigger_count == 2
    assert test.label_space.names == ["O", "End"]


def test_reexport_byte_identical(tmp_path, tiny_model_dir):
    corpus = write_corpus(tmp_path, sample_records())
    a = export(corpus, tiny_model_dir, tmp_path / "a")
    b = export(corpus, tiny_model_dir, tmp_path / "b")
    for split in a:
        raw_a = open(a[split]["path"], "rb").read()
        raw_b = open(b[split]["path"], "rb").read()
        assert raw_a == raw_b


def test_subtoken_mean_pooling(tmp_path, tiny_model_dir):
    # "unhappiness" splits into several word pieces; its word vector must be
    # the arithmetic mean of those piece vectors
    enc = WordEncoder(tiny_model_dir)
    tokens = ["unhappiness", "spread"]
    encoded = enc.encode(tokens)
    assert encoded.vectors.shape == (2, 16)

    ids = enc.tokenizer(tokens, is_split_into_words=True,
                        return_tensors="pt")
    pieces = ids.word_ids(0)
    assert pieces.count(0) > 1  # really multi-piece
    with torch.no_grad():
        hidden = enc.model(**ids).last_hidden_state[0].numpy()
    expected = np.stack([
        hidden[[i for i, w in enumerate(pieces) if w == 0]].mean(axis=0),
        hidden[[i for i, w in enumerate(pieces) if w == 1]].mean(axis=0),
    ]).astype(np.float32)
    assert np.allclose(encoded.vectors, expected, atol=1e-6)


def test_truncation_skips_late_trigger(tmp_path, tiny_model_dir, caplog):
    long_tokens = ["word"] * 200
    records = [
        {"id": 0, "tokens": long_tokens, "trigger_index": 199,
         "event_type": "Late", "split": "train"},
        {"id": 1, "tokens": long_tokens, "trigger_index": 0,
         "event_type": "Late", "split": "train"},
    ]
    corpus = write_corpus(tmp_path, records)
    with caplog.at_level("WARNING", logger="embx"):
        report = export(corpus, tiny_model_dir, tmp_path / "out")
    assert report["train"]["skipped"] == 1
    assert report["train"]["sentences"] == 1
    assert "skipping sentence 0" in caplog.text
    ds = load_emb1(report["train"]["path"])
    # 128 sub-token budget minus [CLS]/[SEP] leaves 126 single-piece words
    assert ds.records[0].n == 126
    assert ds.records[0].trigger_indices().tolist() == [0]


def test_cli_export(tmp_path, tiny_model_dir, capsys):
    corpus = write_corpus(tmp_path, sample_records())
    out = tmp_path / "cli-out"
    assert run(["export", str(corpus), "--model", tiny_model_dir,
                "--out", str(out)]) == 0
    assert "train: wrote 2 sentences" in capsys.readouterr().out
    assert (out / "train.emb1").exists()
    assert (out / "valid.emb1").exists()
    assert (out / "test.emb1").exists()


def test_cli_errors(tmp_path, tiny_model_dir):
    assert run(["export", "/nonexistent.jsonl", "--model", tiny_model_dir,
                "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1}\n')
    assert run(["export", str(bad), "--model", tiny_model_dir,
                "--out", str(tmp_path)]) == 2
    assert run(["export"]) == 2  # argparse usage failure
