import json

import pytest

from pairdetector.data import (
    PairExample,
    Vocabulary,
    encode_pair_tokens,
    load_pairs,
    shuffle_labels,
    split_examples,
    synthetic_corpus,
    truncate_side,
)
from pairdetector.errors import SchemaError, SequenceTooLongError, SingleClassError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def record(left="mov a b", right="mov c d", label=1):
    return json.dumps({"left": left, "right": right, "label": label, "meta": {}})


class TestLoadPairs:
    def test_loads_both_classes(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [record(label=1), record(label=0)])
        examples = load_pairs(path)
        assert [ex.label for ex in examples] == [1, 0]

    def test_malformed_json_line_reports_line_number(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [record(), "{not json"])
        with pytest.raises(SchemaError) as err:
            load_pairs(path)
        assert err.value.line_no == 2

    @pytest.mark.parametrize(
        "bad",
        [
            json.dumps({"right": "x", "label": 1}),
            json.dumps({"left": "", "right": "x", "label": 1}),
            json.dumps({"left": "x", "right": "y", "label": 2}),
            json.dumps({"left": "x", "right": "y"}),
        ],
    )
    def test_schema_violations(self, tmp_path, bad):
        path = write_lines(tmp_path / "p.jsonl", [record(), bad])
        with pytest.raises(SchemaError):
            load_pairs(path)

    def test_single_class_rejected(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [record(label=1), record(label=1)])
        with pytest.raises(SingleClassError):
            load_pairs(path)

    def test_empty_rejected(self, tmp_path):
        path = write_lines(tmp_path / "p.jsonl", [""])
        with pytest.raises(SchemaError):
            load_pairs(path)


class TestEncoding:
    def test_vocab_maps_unseen_to_unk(self):
        vocab = Vocabulary.build([PairExample("mov a", "mov b", 1)])
        known = vocab.encode(["mov", "a"])
        unknown = vocab.encode(["never-seen"])
        assert unknown == [vocab.token_to_id["<UNK>"]]
        assert all(t != vocab.token_to_id["<UNK>"] for t in known)

    def test_pair_concatenated_around_separator(self):
        tokens = encode_pair_tokens(PairExample("a b ; c", "d e", 1), max_len=32)
        assert tokens == ["a", "b", ";", "c", "<SEP>", "d", "e"]

    def test_sequence_too_long_raises(self):
        long_side = " ; ".join(f"i{k}" for k in range(40))
        with pytest.raises(SequenceTooLongError):
            encode_pair_tokens(PairExample(long_side, long_side, 1), max_len=16)

    def test_sides_truncated_to_hundred_instructions(self):
        side = " ; ".join(f"i{k}" for k in range(150))
        assert len(truncate_side(side).split(" ; ")) == 100


class TestSyntheticCorpus:
    def test_balanced_and_deterministic(self):
        a = synthetic_corpus(100, seed=5)
        b = synthetic_corpus(100, seed=5)
        assert a == b
        assert sum(ex.label for ex in a) == 50

    def test_split_is_disjoint(self):
        examples = synthetic_corpus(50, seed=1)
        train, test = split_examples(examples, 0.8, seed=0)
        assert len(train) == 40 and len(test) == 10

    def test_shuffle_labels_keeps_balance(self):
        examples = synthetic_corpus(100, seed=2)
        shuffled = shuffle_labels(examples, seed=3)
        assert sum(ex.label for ex in shuffled) == 50
        assert [ex.left for ex in shuffled] == [ex.left for ex in examples]
        assert [ex.label for ex in shuffled] != [ex.label for ex in examples]
