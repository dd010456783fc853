"""Shared test builders and independent brute-force oracles.

The oracles deliberately re-implement the merge/pairing semantics in the most
literal way possible (pair scans, relational closure) so they share no code
path with the library implementations they check.
"""

from __future__ import annotations

import random

from blockpair.ingest import BasicBlock, BuildConfig, Instruction
from blockpair.linemap import SourceLine

CFG_A = BuildConfig("x86_64", "gcc", "O0", "prog", "build/prog_O0")
CFG_B = BuildConfig("aarch64", "clang", "O3", "prog", "build/prog_O3")


def mk_ins(addr, mnemonic="nop", operands=()):
    return Instruction(addr, mnemonic, tuple(operands), f"{mnemonic} {', '.join(operands)}".strip())


def mk_block(block_id, start, n_ins=1, labels=(), step=4):
    instructions = tuple(mk_ins(start + k * step) for k in range(n_ins))
    return BasicBlock(
        id=block_id,
        start_address=start,
        instructions=instructions,
        labels=frozenset(labels),
    )


def sl(file, line):
    return SourceLine(file, line)


def labels_of(*pairs):
    return frozenset(SourceLine(f, n) for f, n in pairs)


def block_signature(block):
    """Order-insensitive identity of a (possibly merged) block."""
    return (
        block.start_address,
        frozenset(block.labels),
        tuple((i.address, i.mnemonic) for i in block.instructions),
        frozenset(block.merged_from),
    )


def labels_instr_signature(block):
    return (frozenset(block.labels), tuple(sorted((i.address, i.mnemonic) for i in block.instructions)))


# ---------------------------------------------------------------------------
# merge oracle: literal fixpoint over pair scans


def oracle_merge(p, q):
    instructions = tuple(sorted(p.instructions + q.instructions, key=lambda i: i.address))
    anchor = p if p.start_address <= q.start_address else q
    return BasicBlock(
        id=anchor.id,
        start_address=instructions[0].address,
        instructions=instructions,
        labels=frozenset(set(p.labels) | set(q.labels)),
        merged_from=tuple(sorted(set(p.merged_from) | set(q.merged_from))),
    )


def _mergeable(a, b):
    return a.labels == b.labels or a.labels < b.labels or b.labels < a.labels


def oracle_bmerge(blocks):
    """Repeatedly merge the first mergeable pair in address order until none remains."""
    work = list(blocks)
    while True:
        work.sort(key=lambda b: (b.start_address, b.id))
        hit = None
        for i in range(len(work)):
            for j in range(i + 1, len(work)):
                if _mergeable(work[i], work[j]):
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return work
        i, j = hit
        b = work.pop(j)
        a = work.pop(i)
        work.append(oracle_merge(a, b))


def random_bmerge_instance(rng: random.Random, max_blocks=12, universe=8):
    lines = [SourceLine(("a.c", "b.c")[k % 2], k + 1) for k in range(rng.randint(1, universe))]
    n = rng.randint(1, max_blocks)
    blocks = []
    for k in range(n):
        size = rng.randint(1, len(lines))
        labels = frozenset(rng.sample(lines, size))
        start = 0x1000 + k * 0x100
        blocks.append(mk_block(f"f:{start:#x}", start, n_ins=rng.randint(1, 3), labels=labels))
    return blocks


# ---------------------------------------------------------------------------
# pairing oracle: components by repeated relational closure (no union-find)


def oracle_closure_components(U, V):
    """Connected components of the intersection relation, grown to fixpoint.

    Returns a list of (frozenset of left ids, frozenset of right ids).
    """
    comps = [({u.id}, set(), [u], []) for u in U] + [(set(), {v.id}, [], [v]) for v in V]
    changed = True
    while changed:
        changed = False
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                li, ri, lbi, rbi = comps[i]
                lj, rj, lbj, rbj = comps[j]
                linked = any(u.labels & v.labels for u in lbi for v in rbj) or any(
                    u.labels & v.labels for u in lbj for v in rbi
                )
                if linked:
                    comps[i] = (li | lj, ri | rj, lbi + lbj, rbi + rbj)
                    comps.pop(j)
                    changed = True
                    break
            if changed:
                break
    return [(frozenset(l), frozenset(r)) for l, r, _, _ in comps]


# ---------------------------------------------------------------------------
# instruction fuzzer shared by the normalization tests and the acceptance gate

FUZZ_MNEMONICS = {
    "x86": ["mov", "add", "sub", "cmp", "lea", "call", "jmp", "jne", "push", "test"],
    "x86_64": ["mov", "add", "sub", "cmp", "lea", "call", "jmp", "je", "push", "imul"],
    "arm32": ["mov", "add", "sub", "cmp", "ldr", "str", "bl", "b", "bne", "lsl"],
    "aarch64": ["mov", "add", "sub", "cmp", "ldr", "str", "bl", "b", "b.eq", "csel"],
}
FUZZ_REGISTERS = {
    "x86": ["eax", "ebx", "ecx", "esp", "ebp"],
    "x86_64": ["rax", "rbx", "rcx", "rsp", "rbp", "rip", "r8d"],
    "arm32": ["r0", "r1", "r3", "fp", "sp", "pc", "lr"],
    "aarch64": ["x0", "x1", "w0", "w2", "sp", "x29", "x30"],
}


def fuzz_operand(rng, isa):
    regs = FUZZ_REGISTERS[isa]
    kind = rng.randrange(8)
    if kind == 0:
        return rng.choice(regs)
    if kind == 1:
        value = rng.randrange(-512, 512)
        if isa in ("arm32", "aarch64"):
            return f"#{value}"
        return hex(value) if value >= 0 else f"-{hex(-value)}"
    if kind == 2:
        if isa in ("arm32", "aarch64"):
            return f"[{rng.choice(regs)}, #{rng.randrange(0, 64)}]"
        return f"[{rng.choice(regs)}+{hex(rng.randrange(0, 256))}]"
    if kind == 3:
        return hex(rng.randrange(0x400000, 0x500000))
    if kind == 4:
        return rng.choice(["some_symbol", "helper", "memcpy", "strcpy", "table_base"])
    if kind == 5:
        return '"lit%d"' % rng.randrange(10)
    if kind == 6:
        return f"DWORD PTR [{rng.choice(regs)}-{hex(rng.randrange(1, 128))}]"
    return str(rng.randrange(0, 1024))


def fuzz_instruction(rng, isa):
    mnemonic = rng.choice(FUZZ_MNEMONICS[isa])
    operands = tuple(fuzz_operand(rng, isa) for _ in range(rng.randrange(0, 4)))
    return Instruction(0x1000, mnemonic, operands, "")


def random_bipartite_instance(rng: random.Random, max_side=10, universe=8):
    lines = [SourceLine("a.c", k + 1) for k in range(rng.randint(1, universe))]

    def side(tag, n):
        blocks = []
        for k in range(n):
            size = rng.randint(1, len(lines))
            start = 0x1000 + k * 0x100
            blocks.append(
                mk_block(
                    f"{tag}{k}:{start:#x}",
                    start,
                    n_ins=rng.randint(1, 2),
                    labels=frozenset(rng.sample(lines, size)),
                )
            )
        return blocks

    return side("u", rng.randint(1, max_side)), side("v", rng.randint(1, max_side))
