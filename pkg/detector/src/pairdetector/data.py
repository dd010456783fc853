"""Dataset loading, vocabulary, pair encoding and the synthetic corpus.

Records come straight from the pipeline's ``pairs.jsonl``: one JSON object per
line with flat space-joined token renderings (instructions separated by a
``;`` token), a 0/1 label and free-form metadata.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import SchemaError, SequenceTooLongError, SingleClassError

PAD = "<PAD>"
UNK = "<UNK>"
SEP = "<SEP>"
INSTRUCTION_SEP = ";"
MAX_INSTRUCTIONS = 100


@dataclass
class PairExample:
    left: str
    right: str
    label: int


@dataclass
class Vocabulary:
    token_to_id: dict = field(default_factory=dict)

    @classmethod
    def build(cls, examples) -> "Vocabulary":
        vocab = cls({PAD: 0, UNK: 1, SEP: 2})
        for ex in examples:
            for tok in ex.left.split() + ex.right.split():
                if tok not in vocab.token_to_id:
                    vocab.token_to_id[tok] = len(vocab.token_to_id)
        return vocab

    def __len__(self):
        return len(self.token_to_id)

    def encode(self, tokens):
        unk = self.token_to_id[UNK]
        return [self.token_to_id.get(t, unk) for t in tokens]


def load_pairs(path) -> list[PairExample]:
    """Parse a pairs.jsonl file; malformed lines raise, single-class data raises."""
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"not valid JSON: {exc}", line_no) from exc
            if not isinstance(obj, dict):
                raise SchemaError("record must be an object", line_no)
            left, right, label = obj.get("left"), obj.get("right"), obj.get("label")
            if not isinstance(left, str) or not left:
                raise SchemaError("'left' must be a non-empty string", line_no)
            if not isinstance(right, str) or not right:
                raise SchemaError("'right' must be a non-empty string", line_no)
            if label not in (0, 1):
                raise SchemaError("'label' must be 0 or 1", line_no)
            examples.append(PairExample(left, right, int(label)))
    if not examples:
        raise SchemaError("dataset is empty")
    labels = {ex.label for ex in examples}
    if len(labels) < 2:
        raise SingleClassError(f"dataset has only class {labels.pop()}")
    return examples


def truncate_side(text: str, max_instructions: int = MAX_INSTRUCTIONS) -> str:
    parts = [p.strip() for p in text.split(INSTRUCTION_SEP)]
    if len(parts) <= max_instructions:
        return text
    return f" {INSTRUCTION_SEP} ".join(parts[:max_instructions])


def encode_pair_tokens(example: PairExample, max_len: int) -> list[str]:
    """Concatenate both sides around a separator; reject over-long pairs."""
    left = truncate_side(example.left).split()
    right = truncate_side(example.right).split()
    tokens = left + [SEP] + right
    if len(tokens) > max_len:
        raise SequenceTooLongError(
            f"pair is {len(tokens)} tokens after truncation; max_len={max_len}"
        )
    return tokens


def split_examples(examples, train_frac=0.8, seed=0):
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    n_train = int(len(examples) * train_frac)
    train = [examples[i] for i in sorted(order[:n_train])]
    test = [examples[i] for i in sorted(order[n_train:])]
    return train, test


def shuffle_labels(examples, seed=0):
    """Destroy the label-token correlation while keeping the class balance."""
    labels = [ex.label for ex in examples]
    random.Random(seed).shuffle(labels)
    return [PairExample(ex.left, ex.right, lab) for ex, lab in zip(examples, labels)]


# ---------------------------------------------------------------------------
# synthetic separable corpus: equivalent pairs share their (rare) operand
# symbols across sides, so token overlap correlates with the label; negatives
# draw from unrelated symbol pools and coincide only by chance


_SYN_MNEMONICS = ["mov", "add", "sub", "cmp", "ldr", "str", "xor", "shl", "mul", "and"]
_SYN_SYMBOLS = [f"sym_{k}" for k in range(160)]
_SYN_PLACEHOLDERS = ["<POSITIVE>", "<NEGATIVE>", "<ZERO>", "<ADDRESS>"]


def _synthetic_side(rng, content, mutate=0.1):
    lines = []
    for mnemonic, op1, op2 in content:
        if rng.random() < mutate:
            op2 = rng.choice(_SYN_PLACEHOLDERS)
        lines.append(f"{mnemonic} {op1} {op2}")
    rng.shuffle(lines)
    return f" {INSTRUCTION_SEP} ".join(lines)


def _content(rng, n):
    return [
        (
            rng.choice(_SYN_MNEMONICS),
            rng.choice(_SYN_SYMBOLS),
            rng.choice(_SYN_SYMBOLS if rng.random() < 0.7 else _SYN_PLACEHOLDERS),
        )
        for _ in range(n)
    ]


def synthetic_corpus(n_pairs: int, seed: int = 0) -> list[PairExample]:
    """Balanced corpus whose positives share instruction content across sides."""
    rng = random.Random(seed)
    examples = []
    for k in range(n_pairs):
        n = rng.randint(4, 9)
        if k % 2 == 0:
            content = _content(rng, n)
            examples.append(
                PairExample(_synthetic_side(rng, content), _synthetic_side(rng, content), 1)
            )
        else:
            examples.append(
                PairExample(
                    _synthetic_side(rng, _content(rng, n)),
                    _synthetic_side(rng, _content(rng, rng.randint(4, 9))),
                    0,
                )
            )
    return examples


def write_pairs_jsonl(examples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "left": ex.left,
                        "right": ex.right,
                        "label": ex.label,
                        "meta": {"function": "synthetic"},
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
