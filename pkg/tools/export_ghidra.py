# Ghidra headless export script producing the JSON dump format this pipeline
# ingests. Run it with analyzeHeadless:
#
#   analyzeHeadless <proj_dir> <proj_name> -import <binary> \
#       -postScript export_ghidra.py <isa> <compiler> <opt_level> <program> <out.json>
#
# Reference producer only: the committed test suite runs entirely from
# pre-exported dumps, and tools/export_objdump.py covers hosts without a
# reverse-engineering platform.

import json

from ghidra.program.model.block import BasicBlockModel
from ghidra.util.task import ConsoleTaskMonitor

ISA_MAP = {
    "x86:LE:32": "x86",
    "x86:LE:64": "x86_64",
    "ARM:LE:32": "arm32",
    "AARCH64:LE:64": "aarch64",
}


def hexify(addr):
    return format(addr.getOffset() & 0xFFFFFFFFFFFFFFFF, "#x")


def instruction_obj(ins):
    operands = []
    for k in range(ins.getNumOperands()):
        operands.append(ins.getDefaultOperandRepresentation(k))
    return {
        "addr": hexify(ins.getAddress()),
        "mnemonic": ins.getMnemonicString().lower(),
        "operands": [op.lower() for op in operands],
        "raw": str(ins).lower(),
    }


def export(isa, compiler, opt_level, program_name, out_path):
    program = currentProgram  # noqa: F821  (injected by the script runner)
    monitor = ConsoleTaskMonitor()
    listing = program.getListing()
    block_model = BasicBlockModel(program)
    func_mgr = program.getFunctionManager()

    library = set()
    functions = []
    for func in func_mgr.getFunctions(True):
        name = func.getName()
        if func.isExternal() or func.isThunk():
            if func.isExternal():
                library.add(name.split("@")[0])
            functions.append(
                {
                    "name": name,
                    "entry": hexify(func.getEntryPoint()),
                    "external": True,
                    "library": False,
                    "blocks": [],
                }
            )
            continue
        blocks = []
        block_iter = block_model.getCodeBlocksContaining(func.getBody(), monitor)
        while block_iter.hasNext():
            code_block = block_iter.next()
            instructions = []
            for ins in listing.getInstructions(code_block, True):
                instructions.append(instruction_obj(ins))
            if instructions:
                blocks.append(
                    {"start": instructions[0]["addr"], "instructions": instructions}
                )
        blocks.sort(key=lambda b: int(b["start"], 16))
        # Statically linked library code identified by FID analysis should set
        # library=True and land in library_functions; plain program functions
        # stay False.
        is_library = name in library
        functions.append(
            {
                "name": name,
                "entry": hexify(func.getEntryPoint()),
                "external": False,
                "library": is_library,
                "blocks": blocks,
            }
        )

    lang = str(program.getLanguageID())
    isa_guess = next((v for k, v in ISA_MAP.items() if lang.startswith(k.split(":")[0])), isa)
    doc = {
        "config": {
            "isa": isa or isa_guess,
            "compiler": compiler,
            "opt_level": opt_level,
            "program": program_name,
            "binary_path": program.getExecutablePath(),
        },
        "library_functions": sorted(library),
        "functions": functions,
    }
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2)


def main():
    args = getScriptArgs()  # noqa: F821
    if len(args) != 5:
        raise SystemExit("usage: export_ghidra.py <isa> <compiler> <opt_level> <program> <out>")
    export(*args)


main()
