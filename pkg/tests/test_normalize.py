import json
import random
import re

import pytest

from blockpair.errors import UnknownISAError
from blockpair.ingest import Instruction
from blockpair.normalize import (
    normalize_block,
    normalize_instruction,
    normalize_text,
    render_block,
)

from helpers import fuzz_instruction, mk_block

ISAS = ("x86", "x86_64", "arm32", "aarch64")

NUMERIC = re.compile(r"-?(0x[0-9a-fA-F]+|[0-9]+)")


def load_golden(fixtures_dir, isa):
    with open(fixtures_dir / f"norm_golden_{isa}.json", encoding="utf-8") as fh:
        return json.load(fh)


def run_case(case, isa, dictionary):
    ins = Instruction(0x1000, case["mnemonic"], tuple(case["operands"]), "")
    return normalize_instruction(ins, isa, dictionary).render()


@pytest.mark.parametrize("isa", ISAS)
def test_golden_conformance(fixtures_dir, isa):
    golden = load_golden(fixtures_dir, isa)
    dictionary = frozenset(golden["library_dictionary"])
    assert len(golden["cases"]) >= 20
    for case in golden["cases"]:
        assert run_case(case, isa, dictionary) == case["expected"], case


@pytest.mark.parametrize("isa", ISAS)
def test_golden_idempotence_and_no_literals(fixtures_dir, isa):
    golden = load_golden(fixtures_dir, isa)
    dictionary = frozenset(golden["library_dictionary"])
    for case in golden["cases"]:
        text = run_case(case, isa, dictionary)
        assert normalize_text(text, isa, dictionary) == text
        for tok in text.split():
            assert not NUMERIC.fullmatch(tok), (case, tok)


def test_unknown_isa_rejected():
    ins = Instruction(0x10, "mov", ("eax", "0x1"), "")
    with pytest.raises(UnknownISAError):
        normalize_instruction(ins, "mips", frozenset())


def test_block_normalization_is_elementwise_in_order():
    block = mk_block("f:0x10", 0x10, n_ins=3)
    out = normalize_block(block, "x86_64", frozenset())
    assert len(out) == 3
    assert all(n.tokens[0] == "nop" for n in out)


def test_render_block_joins_with_separator_token():
    block = mk_block("f:0x10", 0x10, n_ins=2)
    text = render_block(normalize_block(block, "x86_64", frozenset()))
    assert text == "nop ; nop"


def test_dict_miss_and_hit_call_targets():
    hit = Instruction(0x10, "call", ("strcpy",), "")
    miss = Instruction(0x10, "call", ("strcpy",), "")
    assert normalize_instruction(hit, "x86_64", frozenset({"strcpy"})).render() == "call strcpy"
    assert normalize_instruction(miss, "x86_64", frozenset()).render() == "call <FOO>"


def test_determinism_depends_only_on_inputs():
    ins = Instruction(0x10, "mov", ("eax", "0x7"), "")
    a = normalize_instruction(ins, "x86_64", frozenset({"x"}))
    b = normalize_instruction(ins, "x86_64", frozenset({"x"}))
    assert a == b


# ---------------------------------------------------------------------------
# fuzzing: idempotence and literal elimination over generated instructions


@pytest.mark.parametrize("isa", ISAS)
def test_fuzzed_idempotence_and_literal_elimination(isa):
    rng = random.Random(0xBEEF + ISAS.index(isa))
    dictionary = frozenset({"memcpy", "strcpy"})
    for _ in range(2500):
        ins = fuzz_instruction(rng, isa)
        text = normalize_instruction(ins, isa, dictionary).render()
        assert normalize_text(text, isa, dictionary) == text, (ins, text)
        for tok in text.split():
            if tok in dictionary:
                continue
            assert not NUMERIC.fullmatch(tok), (ins, text, tok)
