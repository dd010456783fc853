"""Instruction tokenization and vocabulary-controlling rewrites.

Four rewrites are applied per instruction, in this precedence order:

* call targets: a call-class instruction keeps its target name only when the
  name is in the library dictionary, otherwise the target (name or raw
  address) becomes ``<FOO>``;
* code addresses: bare jump/branch targets and pc-relative displacements
  become ``<ADDRESS>``;
* numeric constants become ``<POSITIVE>``, ``<NEGATIVE>`` or ``<ZERO>``
  according to the sign the disassembler printed;
* quoted string-literal operands become ``<STRING>``.

Registers, mnemonics and structural punctuation pass through unchanged.
Placeholders are terminal: re-normalizing normalized text is the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnknownISAError
from .ingest import BasicBlock, Instruction, ISAS

POSITIVE = "<POSITIVE>"
NEGATIVE = "<NEGATIVE>"
ZERO = "<ZERO>"
ADDRESS = "<ADDRESS>"
STRING = "<STRING>"
FOO = "<FOO>"

PLACEHOLDERS = frozenset({POSITIVE, NEGATIVE, ZERO, ADDRESS, STRING, FOO})

INSTRUCTION_SEP = ";"

_NUM_RE = re.compile(r"0x[0-9a-fA-F]+|[0-9]+")


def _x86_registers():
    regs = {
        "al", "ah", "bl", "bh", "cl", "ch", "dl", "dh", "spl", "bpl", "sil", "dil",
        "ax", "bx", "cx", "dx", "si", "di", "bp", "sp", "ip",
        "cs", "ds", "es", "fs", "gs", "ss",
        "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "eip", "eflags",
        "st",
    }
    regs.update(f"st{i}" for i in range(8))
    regs.update(f"mm{i}" for i in range(8))
    regs.update(f"xmm{i}" for i in range(8))
    regs.update(f"ymm{i}" for i in range(8))
    return regs


def _x86_64_registers():
    regs = _x86_registers() | {
        "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "rip", "rflags",
    }
    regs.update(f"r{i}{s}" for i in range(8, 16) for s in ("", "b", "w", "d"))
    regs.update(f"{p}{i}" for p in ("xmm", "ymm", "zmm") for i in range(32))
    regs.update(f"k{i}" for i in range(8))
    return regs


def _arm32_registers():
    regs = {"sp", "lr", "pc", "fp", "ip", "sl", "sb", "cpsr", "spsr", "apsr", "fpscr"}
    regs.update(f"r{i}" for i in range(16))
    regs.update(f"s{i}" for i in range(32))
    regs.update(f"d{i}" for i in range(32))
    regs.update(f"q{i}" for i in range(16))
    return regs


def _aarch64_registers():
    regs = {"sp", "wsp", "pc", "lr", "fp", "xzr", "wzr", "nzcv", "fpcr", "fpsr"}
    regs.update(f"x{i}" for i in range(31))
    regs.update(f"w{i}" for i in range(31))
    regs.update(f"{p}{i}" for p in ("v", "q", "d", "s", "h", "b") for i in range(32))
    return regs


_X86_CONDITIONS = (
    "a", "ae", "b", "be", "c", "e", "g", "ge", "l", "le", "na", "nae", "nb", "nbe",
    "nc", "ne", "ng", "nge", "nl", "nle", "no", "np", "ns", "nz", "o", "p", "pe",
    "po", "s", "z",
)
_ARM_CONDITIONS = (
    "", "eq", "ne", "cs", "hs", "cc", "lo", "mi", "pl", "vs", "vc", "hi", "ls",
    "ge", "lt", "gt", "le", "al",
)

_X86_JUMPS = (
    {"jmp", "jcxz", "jecxz", "jrcxz", "loop", "loope", "loopne", "loopz", "loopnz"}
    | {f"j{cc}" for cc in _X86_CONDITIONS}
)

_ISA_TABLES = {
    "x86": {
        "registers": _x86_registers(),
        "calls": {"call"},
        "jumps": _X86_JUMPS,
        "pc_regs": {"eip"},
        "adr": set(),
    },
    "x86_64": {
        "registers": _x86_64_registers(),
        "calls": {"call"},
        "jumps": _X86_JUMPS,
        "pc_regs": {"rip", "eip"},
        "adr": set(),
    },
    "arm32": {
        "registers": _arm32_registers(),
        "calls": {"bl", "blx"},
        "jumps": {f"b{cc}" for cc in _ARM_CONDITIONS} | {"bx", "cbz", "cbnz"},
        "pc_regs": {"pc"},
        "adr": {"adr", "ldr"},
    },
    "aarch64": {
        "registers": _aarch64_registers(),
        "calls": {"bl"},
        "jumps": (
            {"b", "br", "cbz", "cbnz", "tbz", "tbnz", "ret"}
            | {f"b.{cc}" for cc in _ARM_CONDITIONS if cc}
        ),
        "pc_regs": {"pc"},
        "adr": {"adr", "adrp", "ldr", "ldrsw", "prfm"},
    },
}


def _tables(isa: str):
    try:
        return _ISA_TABLES[isa]
    except KeyError:
        raise UnknownISAError(f"unsupported isa {isa!r} (expected one of {ISAS})") from None


@dataclass(frozen=True)
class NormalizedInstruction:
    tokens: tuple

    def render(self) -> str:
        return " ".join(self.tokens)


# x86 memory-operand keywords: structural, never transfer targets
_OPERAND_KEYWORDS = frozenset(
    {
        "byte", "word", "dword", "qword", "tbyte", "fword", "xmmword", "ymmword",
        "zmmword", "ptr", "offset", "short", "near", "far",
    }
)

_LEX_RE = re.compile(
    r"""
      (?P<ws>[\s,]+)
    | (?P<str>"(?:[^"\\]|\\.)*")
    | (?P<ph><(?:POSITIVE|NEGATIVE|ZERO|ADDRESS|STRING|FOO)>)
    | (?P<num>0x[0-9a-fA-F]+|[0-9]+)
    | (?P<ident>[A-Za-z_.][A-Za-z0-9_.$@]*)
    | (?P<punct>[\[\]{}()+\-*:!#])
    | (?P<other>\S)
    """,
    re.X,
)


def lex_operand(text: str) -> list[str]:
    """Split one operand into atoms; quoted strings stay single tokens."""
    out = []
    for m in _LEX_RE.finditer(text):
        if m.lastgroup == "ws":
            continue
        out.append(m.group())
    return out


def _sign_placeholder(sign: str, literal: str) -> str:
    value = int(literal, 16) if literal.lower().startswith("0x") else int(literal)
    if value == 0:
        return ZERO
    return NEGATIVE if sign == "-" else POSITIVE


def _is_number(tok: str) -> bool:
    return bool(_NUM_RE.fullmatch(tok))


def normalize_tokens(mnemonic: str, tokens: list[str], isa: str, dict_names) -> list[str]:
    """Classify an already-lexed operand token stream (the mnemonic leads it)."""
    tables = _tables(isa)
    registers = tables["registers"]
    mnlow = mnemonic.lower()
    is_call = mnlow in tables["calls"]
    is_jump = mnlow in tables["jumps"]
    is_adr = mnlow in tables["adr"]

    # Pre-compute, per token position, whether it lies inside a bracket group
    # whose base register is the program counter (pc/rip): displacements there
    # are code references, not stack offsets.
    in_pc_group = [False] * len(tokens)
    open_stack = []
    group_spans = []
    for i, tok in enumerate(tokens):
        if tok == "[":
            open_stack.append(i)
        elif tok == "]" and open_stack:
            group_spans.append((open_stack.pop(), i))
    for lo, hi in group_spans:
        if any(t.lower() in tables["pc_regs"] for t in tokens[lo : hi + 1]):
            for i in range(lo, hi + 1):
                in_pc_group[i] = True

    depth = 0
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "[":
            depth += 1
            out.append(tok)
            i += 1
            continue
        if tok == "]":
            depth = max(0, depth - 1)
            out.append(tok)
            i += 1
            continue
        if tok in PLACEHOLDERS:
            out.append(tok)
            i += 1
            continue
        if tok.startswith('"') and tok.endswith('"') and len(tok) >= 2:
            out.append(STRING)
            i += 1
            continue

        # A sign or immediate marker directly before a number is folded into
        # the number's classification.
        sign = ""
        j = i
        if tok == "#":
            j += 1
            if j < len(tokens) and tokens[j] in ("+", "-"):
                sign = tokens[j]
                j += 1
            if j < len(tokens) and _is_number(tokens[j]):
                if in_pc_group[j] and depth > 0:
                    out.append(ADDRESS)
                else:
                    out.append(_sign_placeholder(sign, tokens[j]))
                i = j + 1
                continue
            out.append(tok)
            i += 1
            continue
        if tok in ("+", "-") and i + 1 < len(tokens) and _is_number(tokens[i + 1]):
            sign = tok
            number = tokens[i + 1]
            if in_pc_group[i + 1] and depth > 0:
                out.append(ADDRESS)
            elif depth == 0 and is_jump:
                out.append(ADDRESS)
            elif depth == 0 and is_call:
                out.append(FOO)
            else:
                out.append(_sign_placeholder(sign, number))
            i += 2
            continue

        if _is_number(tok):
            if depth > 0:
                out.append(ADDRESS if in_pc_group[i] else _sign_placeholder("", tok))
            elif is_call:
                out.append(FOO)
            elif is_jump or is_adr:
                out.append(ADDRESS)
            else:
                out.append(_sign_placeholder("", tok))
            i += 1
            continue

        low = tok.lower()
        if low in registers or low in _OPERAND_KEYWORDS:
            out.append(tok)
            i += 1
            continue
        if depth == 0 and (is_call or is_jump) and re.fullmatch(r"[A-Za-z_.][\w.$@]*", tok):
            # symbolic transfer target
            if is_call:
                out.append(tok if tok in dict_names else FOO)
            else:
                out.append(ADDRESS)
            i += 1
            continue

        out.append(tok)
        i += 1
    return out


def normalize_instruction(ins: Instruction, isa: str, dict_names) -> NormalizedInstruction:
    """Apply the rewrite rules to one instruction."""
    tokens = []
    for op in ins.operands:
        tokens.extend(lex_operand(op))
    normalized = normalize_tokens(ins.mnemonic, tokens, isa, dict_names)
    return NormalizedInstruction(tuple([ins.mnemonic] + normalized))


def normalize_block(block: BasicBlock, isa: str, dict_names) -> list[NormalizedInstruction]:
    return [normalize_instruction(ins, isa, dict_names) for ins in block.instructions]


def render_block(normalized) -> str:
    """Flat block rendering: token lists joined by the instruction separator token."""
    return f" {INSTRUCTION_SEP} ".join(n.render() for n in normalized)


def normalize_text(text: str, isa: str, dict_names) -> str:
    """Re-normalize a flat rendering; identity on already-normalized text."""
    out = []
    for segment in text.split(INSTRUCTION_SEP):
        tokens = segment.split()
        if not tokens:
            out.append("")
            continue
        lexed = []
        for tok in tokens[1:]:
            lexed.extend(lex_operand(tok))
        normalized = normalize_tokens(tokens[0], lexed, isa, dict_names)
        out.append(" ".join([tokens[0]] + normalized))
    return f" {INSTRUCTION_SEP} ".join(s.strip() for s in out)
