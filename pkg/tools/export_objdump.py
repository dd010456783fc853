#!/usr/bin/env python3
"""Reference dump exporter backed by GNU objdump.

Produces the JSON dump format consumed by the pipeline from any ELF binary
objdump can disassemble.  Basic blocks are recovered per function with the
classic leader rule: a function's entry, every branch target inside the
function, and every instruction after a control transfer start a new block.

PLT stubs are exported as external functions and their base names feed the
library dictionary.  This script is a convenience for producing dumps without
a full reverse-engineering platform; a headless-analyzer export (see
export_ghidra.py) is the richer producer.
"""

import argparse
import json
import re
import subprocess
import sys

SECTION_RE = re.compile(r"^Disassembly of section (\S+):$")
SYMBOL_RE = re.compile(r"^([0-9a-f]+) <([^>]+)>:$")
INS_RE = re.compile(r"^\s+([0-9a-f]+):\s+(.*)$")
TARGET_ANNOT_RE = re.compile(r"<([^>]+)>\s*$")

X86_PREFIXES = {"lock", "rep", "repz", "repnz", "repe", "repne", "bnd", "notrack", "data16"}

X86_CONDITIONS = (
    "a", "ae", "b", "be", "c", "e", "g", "ge", "l", "le", "na", "nae", "nb", "nbe",
    "nc", "ne", "ng", "nge", "nl", "nle", "no", "np", "ns", "nz", "o", "p", "pe",
    "po", "s", "z",
)
X86_JUMPS = {"jmp", "jcxz", "jecxz", "jrcxz", "loop", "loope", "loopne"} | {
    f"j{c}" for c in X86_CONDITIONS
}
X86_STOPS = X86_JUMPS | {"ret", "retq", "hlt", "ud2"}
X86_CALLS = {"call", "callq"}

ARM_CONDS = ("", "eq", "ne", "cs", "hs", "cc", "lo", "mi", "pl", "vs", "vc", "hi",
             "ls", "ge", "lt", "gt", "le", "al")
ARM_JUMPS = {f"b{c}" for c in ARM_CONDS} | {"bx", "cbz", "cbnz"}
ARM_STOPS = ARM_JUMPS | {"bx"}
ARM_CALLS = {"bl", "blx"}
A64_JUMPS = {"b", "br", "cbz", "cbnz", "tbz", "tbnz"} | {f"b.{c}" for c in ARM_CONDS if c}
A64_STOPS = A64_JUMPS | {"ret"}
A64_CALLS = {"bl"}

ISA_TABLES = {
    "x86": (X86_JUMPS, X86_STOPS, X86_CALLS),
    "x86_64": (X86_JUMPS, X86_STOPS, X86_CALLS),
    "arm32": (ARM_JUMPS, ARM_STOPS, ARM_CALLS),
    "aarch64": (A64_JUMPS, A64_STOPS, A64_CALLS),
}


def run_objdump(binary, isa):
    cmd = ["objdump", "-d", "--no-show-raw-insn"]
    if isa in ("x86", "x86_64"):
        cmd.append("-M")
        cmd.append("intel")
    cmd.append(binary)
    return subprocess.run(cmd, capture_output=True, text=True, check=True).stdout


def strip_comment(text, isa):
    if isa in ("x86", "x86_64"):
        return text.split("#", 1)[0].rstrip()
    for marker in (" //", " ;", " @"):
        if marker in text:
            text = text.split(marker, 1)[0]
    return text.rstrip()


def parse_functions(listing):
    """Yield (section, name, [(addr, text), ...]) per symbol."""
    section = None
    current = None
    for line in listing.splitlines():
        m = SECTION_RE.match(line)
        if m:
            section = m.group(1)
            continue
        m = SYMBOL_RE.match(line)
        if m:
            if current:
                yield current
            current = (section, m.group(2), [])
            continue
        m = INS_RE.match(line)
        if m and current is not None:
            text = m.group(2).strip()
            if text and text != "...":
                current[2].append((int(m.group(1), 16), text))
    if current:
        yield current


def split_instruction(addr, text, isa, all_funcs, library):
    """-> (mnemonic, [operand strings], raw, effective mnemonic, branch target)"""
    text = strip_comment(text, isa)
    annot = TARGET_ANNOT_RE.search(text)
    target_sym = annot.group(1) if annot else None
    if annot:
        text = text[: annot.start()].rstrip()
    parts = text.split(None, 1)
    mnemonic = parts[0]
    rest = parts[1].strip() if len(parts) > 1 else ""
    effective = mnemonic
    if isa in ("x86", "x86_64") and mnemonic in X86_PREFIXES and rest:
        sub = rest.split(None, 1)
        effective = sub[0]

    jumps, _, calls = ISA_TABLES[isa]
    operands = [op.strip() for op in _split_top_level(rest) if op.strip()]
    target_addr = None
    if effective in jumps | calls and operands:
        idx = 0 if isa in ("x86", "x86_64") else len(operands) - 1
        if re.fullmatch(r"(0x)?[0-9a-f]+", operands[idx]):
            target_addr = int(operands[idx], 16)
            replacement = format(target_addr, "#x")
            if effective in calls and target_sym and "+" not in target_sym:
                base = target_sym.split("@")[0]
                if base in all_funcs or target_sym.endswith("@plt"):
                    replacement = base
                if target_sym.endswith("@plt"):
                    library.add(base)
            operands[idx] = replacement
    raw = f"{mnemonic} {', '.join(operands)}".strip()
    return mnemonic, operands, raw, effective, target_addr


def _split_top_level(text):
    out = []
    depth = 0
    token = ""
    for ch in text:
        if ch in "[({":
            depth += 1
        elif ch in "])}":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(token)
            token = ""
        else:
            token += ch
    out.append(token)
    return out


_PADDING_MNEMONICS = {"nop", "nopw", "nopl", "data16", "cs", "xchg"}


def _trim_alignment_padding(parsed):
    """Drop the trailing nop run objdump attributes to the preceding symbol."""
    while len(parsed) > 1 and parsed[-1][1][0] in _PADDING_MNEMONICS:
        parsed.pop()
    return parsed


def build_blocks(name, instructions, isa, all_funcs, library):
    jumps, stops, calls = ISA_TABLES[isa]
    parsed = []
    for addr, text in instructions:
        parsed.append((addr, split_instruction(addr, text, isa, all_funcs, library)))
    parsed = _trim_alignment_padding(parsed)
    addrs = {addr for addr, _ in parsed}
    leaders = {parsed[0][0]} if parsed else set()
    for i, (addr, (_, _, _, effective, target)) in enumerate(parsed):
        if effective in stops or effective in jumps:
            if i + 1 < len(parsed):
                leaders.add(parsed[i + 1][0])
            if target is not None and target in addrs:
                leaders.add(target)
    blocks = []
    current = None
    for addr, (mnemonic, operands, raw, _, _) in parsed:
        if addr in leaders:
            if current:
                blocks.append(current)
            current = {"start": format(addr, "#x"), "instructions": []}
        current["instructions"].append(
            {"addr": format(addr, "#x"), "mnemonic": mnemonic, "operands": operands, "raw": raw}
        )
    if current:
        blocks.append(current)
    return blocks


def export(binary, isa, compiler, opt_level, program, binary_path=None):
    listing = run_objdump(binary, isa)
    records = list(parse_functions(listing))
    all_funcs = {name for _, name, _ in records}
    library = set()
    functions = []
    seen = set()
    for section, name, instructions in records:
        if name in seen:
            continue
        seen.add(name)
        if section and section.startswith(".plt"):
            base = name.split("@")[0]
            if name.endswith("@plt"):
                library.add(base)
            functions.append(
                {
                    "name": name,
                    "entry": format(instructions[0][0] if instructions else 0, "#x"),
                    "external": True,
                    "library": False,
                    "blocks": [],
                }
            )
            continue
        if not section or not section.startswith(".text"):
            continue
        if not instructions:
            continue
        blocks = build_blocks(name, instructions, isa, all_funcs, library)
        functions.append(
            {
                "name": name,
                "entry": format(instructions[0][0], "#x"),
                "external": False,
                "library": False,
                "blocks": blocks,
            }
        )
    return {
        "config": {
            "isa": isa,
            "compiler": compiler,
            "opt_level": opt_level,
            "program": program,
            "binary_path": binary_path or binary,
        },
        "library_functions": sorted(library),
        "functions": functions,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("binary")
    ap.add_argument("--isa", required=True, choices=sorted(ISA_TABLES))
    ap.add_argument("--compiler", required=True, choices=["gcc", "clang"])
    ap.add_argument("--opt-level", required=True, choices=["O0", "O1", "O2", "O3"])
    ap.add_argument("--program", required=True)
    ap.add_argument("--binary-path", help="value recorded in the dump (defaults to the input path)")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args()
    doc = export(args.binary, args.isa, args.compiler, args.opt_level, args.program,
                 args.binary_path)
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    n_blocks = sum(len(f["blocks"]) for f in doc["functions"])
    print(f"{args.output}: {len(doc['functions'])} functions, {n_blocks} blocks",
          file=sys.stderr)


if __name__ == "__main__":
    main()
