"""Disassembler-neutral program dump format and the in-memory program model.

A dump is a single JSON document produced by an exporter script running inside
a disassembler (see ``tools/``).  Parsing validates the full schema up front so
every later stage can assume a well-formed program.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from .errors import DuplicateSymbolError, OverlapError, SchemaError

ISAS = ("x86", "x86_64", "arm32", "aarch64")
COMPILERS = ("gcc", "clang")
OPT_LEVELS = ("O0", "O1", "O2", "O3")

# lowercase, 0x-prefixed, no superfluous leading zeros
_HEX_RE = re.compile(r"0x(?:0|[1-9a-f][0-9a-f]*)")

_MAX_ADDRESS = 2**64 - 1


@dataclass(frozen=True)
class BuildConfig:
    """One (ISA, compiler, optimization level) coordinate of the build matrix."""

    isa: str
    compiler: str
    opt_level: str
    program_name: str
    binary_path: str

    def coordinate(self) -> str:
        return f"{self.isa}-{self.compiler}-{self.opt_level}"

    def key(self) -> tuple[str, str, str, str]:
        return (self.isa, self.compiler, self.opt_level, self.program_name)


@dataclass(frozen=True)
class Instruction:
    address: int
    mnemonic: str
    operands: tuple[str, ...]
    raw_text: str


@dataclass(frozen=True)
class BasicBlock:
    """Address-ranged instruction run carrying the source-line label set.

    ``labels`` is empty until the annotation stage attaches source lines.
    ``merged_from`` tracks the original block ids folded into this block; an
    unmerged block carries just its own id.
    """

    id: str
    start_address: int
    instructions: tuple[Instruction, ...]
    labels: frozenset = frozenset()
    merged_from: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.merged_from:
            object.__setattr__(self, "merged_from", (self.id,))

    @property
    def end_address(self) -> int:
        return self.instructions[-1].address

    def with_labels(self, labels) -> "BasicBlock":
        return replace(self, labels=frozenset(labels))


@dataclass(frozen=True)
class FunctionRecord:
    name: str
    entry_address: int
    blocks: tuple[BasicBlock, ...]
    is_external: bool = False
    is_library: bool = False


@dataclass(frozen=True)
class ProgramDump:
    config: BuildConfig
    functions: tuple[FunctionRecord, ...]
    library_dictionary: frozenset = frozenset()

    def function(self, name: str) -> FunctionRecord:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def all_addresses(self) -> list[int]:
        """Every instruction address, in document order."""
        out = []
        for f in self.functions:
            for b in f.blocks:
                out.extend(i.address for i in b.instructions)
        return out


def _expect(obj, key, kind, path):
    if not isinstance(obj, dict):
        raise SchemaError(f"expected object, got {type(obj).__name__}", path)
    if key not in obj:
        raise SchemaError(f"missing field {key!r}", path)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(
            f"field {key!r} must be {kind.__name__}, got {type(value).__name__}",
            f"{path}.{key}",
        )
    return value


def _parse_hex(text, path):
    if not isinstance(text, str) or not _HEX_RE.fullmatch(text):
        raise SchemaError(f"not a canonical hex address: {text!r}", path)
    value = int(text, 16)
    if value > _MAX_ADDRESS:
        raise SchemaError(f"address out of 64-bit range: {text}", path)
    return value


def _parse_instruction(obj, path):
    addr = _parse_hex(_expect(obj, "addr", None, path), f"{path}.addr")
    mnemonic = _expect(obj, "mnemonic", str, path)
    if not mnemonic:
        raise SchemaError("mnemonic is empty", f"{path}.mnemonic")
    operands = _expect(obj, "operands", list, path)
    for k, op in enumerate(operands):
        if not isinstance(op, str):
            raise SchemaError("operand must be a string", f"{path}.operands[{k}]")
    raw = _expect(obj, "raw", str, path)
    return Instruction(addr, mnemonic, tuple(operands), raw)


def _parse_block(obj, func_name, path):
    start = _parse_hex(_expect(obj, "start", None, path), f"{path}.start")
    instrs_json = _expect(obj, "instructions", list, path)
    if not instrs_json:
        raise SchemaError("block has no instructions", f"{path}.instructions")
    instrs = []
    prev = -1
    for k, iobj in enumerate(instrs_json):
        ins = _parse_instruction(iobj, f"{path}.instructions[{k}]")
        if ins.address <= prev:
            raise SchemaError(
                f"instruction addresses not strictly increasing at {ins.address:#x}",
                f"{path}.instructions[{k}].addr",
            )
        prev = ins.address
        instrs.append(ins)
    if start != instrs[0].address:
        raise SchemaError(
            f"block start {start:#x} does not equal first instruction address "
            f"{instrs[0].address:#x}",
            f"{path}.start",
        )
    return BasicBlock(id=f"{func_name}:{start:#x}", start_address=start, instructions=tuple(instrs))


def _parse_function(obj, library_names, path):
    name = _expect(obj, "name", str, path)
    if not name:
        raise SchemaError("function name is empty", f"{path}.name")
    entry = _parse_hex(_expect(obj, "entry", None, path), f"{path}.entry")
    external = _expect(obj, "external", bool, path)
    library = _expect(obj, "library", bool, path)
    blocks_json = _expect(obj, "blocks", list, path)
    if external and blocks_json:
        raise SchemaError(f"external function {name!r} must have zero blocks", f"{path}.blocks")
    if library and name not in library_names:
        raise SchemaError(
            f"library function {name!r} missing from library_functions", f"{path}.library"
        )
    blocks = [
        _parse_block(bobj, name, f"{path}.blocks[{k}]") for k, bobj in enumerate(blocks_json)
    ]

    # Blocks within one function must cover disjoint address ranges.
    spans = sorted(((b.start_address, b.end_address, b) for b in blocks))
    for (s1, e1, _), (s2, e2, _) in zip(spans, spans[1:]):
        if s2 <= e1:
            raise OverlapError(
                f"function {name!r} has overlapping blocks "
                f"[{s1:#x},{e1:#x}] and [{s2:#x},{e2:#x}]",
                path,
            )
    return FunctionRecord(name, entry, tuple(blocks), external, library)


def parse_dump(path) -> ProgramDump:
    """Parse and validate a dump file; raises on the first violation found."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}", str(path)) from exc
    return parse_dump_obj(doc)


def parse_dump_obj(doc) -> ProgramDump:
    cfg = _expect(doc, "config", dict, "$")
    isa = _expect(cfg, "isa", str, "$.config")
    if isa not in ISAS:
        raise SchemaError(f"unknown isa {isa!r} (expected one of {ISAS})", "$.config.isa")
    compiler = _expect(cfg, "compiler", str, "$.config")
    if compiler not in COMPILERS:
        raise SchemaError(f"unknown compiler {compiler!r}", "$.config.compiler")
    opt = _expect(cfg, "opt_level", str, "$.config")
    if opt not in OPT_LEVELS:
        raise SchemaError(f"unknown opt_level {opt!r}", "$.config.opt_level")
    program = _expect(cfg, "program", str, "$.config")
    binary_path = _expect(cfg, "binary_path", str, "$.config")
    config = BuildConfig(isa, compiler, opt, program, binary_path)

    lib_json = _expect(doc, "library_functions", list, "$")
    for k, nm in enumerate(lib_json):
        if not isinstance(nm, str):
            raise SchemaError("library function name must be a string", f"$.library_functions[{k}]")
    library = frozenset(lib_json)

    funcs_json = _expect(doc, "functions", list, "$")
    functions = []
    seen = set()
    for k, fobj in enumerate(funcs_json):
        func = _parse_function(fobj, library, f"$.functions[{k}]")
        if func.name in seen:
            raise DuplicateSymbolError(
                f"duplicate function symbol {func.name!r}", f"$.functions[{k}].name"
            )
        seen.add(func.name)
        functions.append(func)
    return ProgramDump(config, tuple(functions), library)


def serialize_dump(dump: ProgramDump) -> str:
    """Render a dump back to its JSON wire form (inverse of :func:`parse_dump`)."""
    doc = {
        "config": {
            "isa": dump.config.isa,
            "compiler": dump.config.compiler,
            "opt_level": dump.config.opt_level,
            "program": dump.config.program_name,
            "binary_path": dump.config.binary_path,
        },
        "library_functions": sorted(dump.library_dictionary),
        "functions": [
            {
                "name": f.name,
                "entry": format(f.entry_address, "#x"),
                "external": f.is_external,
                "library": f.is_library,
                "blocks": [
                    {
                        "start": format(b.start_address, "#x"),
                        "instructions": [
                            {
                                "addr": format(i.address, "#x"),
                                "mnemonic": i.mnemonic,
                                "operands": list(i.operands),
                                "raw": i.raw_text,
                            }
                            for i in b.instructions
                        ],
                    }
                    for b in f.blocks
                ],
            }
            for f in dump.functions
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def sanitize(dump: ProgramDump) -> ProgramDump:
    """Drop external functions (they have no bodies); keeps the dictionary intact."""
    kept = tuple(f for f in dump.functions if not f.is_external)
    return replace(dump, functions=kept)
