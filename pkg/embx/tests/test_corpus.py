import json

import pytest

from embx.corpus import (CorpusError, label_space_for, load_corpus,
                         parse_record, split_corpus)


def record(**kw):
    base = {"id": 1, "tokens": ["the", "troops", "attacked"],
            "trigger_index": 2, "event_type": "Attack", "split": "train"}
    base.update(kw)
    return base


def write_corpus(tmp_path, records, name="corpus.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


def test_parse_valid_record():
    rec = parse_record(record())
    assert rec.sentence_id == 1
    assert rec.tokens == ["the", "troops", "attacked"]
    assert rec.trigger_index == 2
    assert rec.event_type == "Attack"


def test_parse_rejections():
    with pytest.raises(CorpusError, match="missing field"):
        parse_record({"id": 1})
    with pytest.raises(CorpusError, match="trigger_index"):
        parse_record(record(trigger_index=3))
    with pytest.raises(CorpusError, match="trigger_index"):
        parse_record(record(trigger_index=-1))
    with pytest.raises(CorpusError, match="event_type"):
        parse_record(record(event_type="O"))
    with pytest.raises(CorpusError, match="event_type"):
        parse_record(record(event_type=""))
    with pytest.raises(CorpusError, match="split"):
        parse_record(record(split="dev"))
    with pytest.raises(CorpusError, match="tokens"):
        parse_record(record(tokens=[]))


def test_load_corpus_line_numbers(tmp_path):
    path = write_corpus(tmp_path, [record(), record(id=2, trigger_index=9)])
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(path)


def test_load_corpus_duplicate_id(tmp_path):
    path = write_corpus(tmp_path, [record(), record()])
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(path)


def test_load_corpus_bad_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(CorpusError, match="invalid JSON"):
        load_corpus(path)


def test_load_corpus_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("\n")
    with pytest.raises(CorpusError, match="no records"):
        load_corpus(path)


def test_split_and_label_space(tmp_path):
    path = write_corpus(tmp_path, [
        record(),
        record(id=2, event_type="Fire", split="train"),
        record(id=3, event_type="Meet", split="test"),
    ])
    by_split = split_corpus(load_corpus(path))
    assert len(by_split["train"]) == 2
    assert len(by_split["test"]) == 1
    assert by_split["valid"] == []
    assert label_space_for(by_split["train"]) == ["O", "Attack", "Fire"]
