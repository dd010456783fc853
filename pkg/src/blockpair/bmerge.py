"""Consolidate basic blocks of one function whose label sets coincide or nest.

After this pass no two surviving blocks of the function have equal label sets
and no survivor's set is contained in another's, so each block's annotation is
unique within its build and can serve as a matching key across builds.

The merge loop is a literal fixpoint: repeatedly merge the first mergeable
pair in address order until none remains.  A single-pass "absorb subsets into
supersets, smallest first" shortcut is NOT equivalent: merging two nested sets
can move the surviving superset to a lower address, and that changes which of
several incomparable supersets a later block must fold into.  Block counts per
function are small, so the quadratic rescan is cheap.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import EmptyLabelError
from .ingest import BasicBlock


def merge_blocks(p: BasicBlock, q: BasicBlock) -> BasicBlock:
    """Fold two blocks into one; the lower-address block is the anchor.

    Instructions are re-ordered by address so the merged body reads like the
    original program text regardless of merge order.
    """
    anchor = p if p.start_address <= q.start_address else q
    instructions = tuple(sorted(p.instructions + q.instructions, key=lambda i: i.address))
    return replace(
        anchor,
        start_address=instructions[0].address,
        instructions=instructions,
        labels=p.labels | q.labels,
        merged_from=tuple(sorted(set(p.merged_from) | set(q.merged_from))),
    )


def _mergeable(a: BasicBlock, b: BasicBlock) -> bool:
    return a.labels == b.labels or a.labels < b.labels or b.labels < a.labels


def bmerge(blocks) -> list[BasicBlock]:
    """Merge all equal- and subset-labeled blocks of one function.

    Returns the refined blocks sorted by start address.  Every input block must
    already carry at least one label; the annotation stage discards unlabeled
    blocks before this point.
    """
    work = sorted(blocks, key=lambda b: (b.start_address, b.id))
    for b in work:
        if not b.labels:
            raise EmptyLabelError(f"block {b.id} reached bmerge with an empty label set")

    merged = True
    while merged:
        merged = False
        work.sort(key=lambda b: (b.start_address, b.id))
        for i in range(len(work)):
            for j in range(i + 1, len(work)):
                if _mergeable(work[i], work[j]):
                    b = work.pop(j)
                    a = work.pop(i)
                    work.append(merge_blocks(a, b))
                    merged = True
                    break
            if merged:
                break

    return sorted(work, key=lambda b: b.start_address)
