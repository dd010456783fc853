"""Match equivalent blocks across two builds of the same function.

Blocks from the two builds form a bipartite graph with an edge wherever the
label sets intersect; each connected component that touches both sides folds
into exactly one equivalent pair.  Components living entirely on one side are
unmatched code (e.g. eliminated by the optimizer) and are reported, never
paired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bmerge import merge_blocks
from .ingest import BasicBlock, BuildConfig, ProgramDump


@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple
    right: tuple
    edges: frozenset  # of (left index, right index)


@dataclass(frozen=True)
class EquivalentPair:
    left_block: BasicBlock
    right_block: BasicBlock
    function_name: str
    left_config: BuildConfig
    right_config: BuildConfig
    shared_labels: frozenset


@dataclass(frozen=True)
class OneSidedComponent:
    function: str
    side: str  # "left" | "right"
    block_ids: tuple


@dataclass
class UnmatchedReport:
    left_only_functions: list = field(default_factory=list)
    right_only_functions: list = field(default_factory=list)
    one_sided_components: list = field(default_factory=list)

    def to_json_obj(self):
        return {
            "left_only_functions": sorted(self.left_only_functions),
            "right_only_functions": sorted(self.right_only_functions),
            "one_sided_components": [
                {"function": c.function, "side": c.side, "block_ids": list(c.block_ids)}
                for c in self.one_sided_components
            ],
        }


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def build_graph(U, V) -> BipartiteGraph:
    """Connect blocks whose label sets intersect."""
    left = tuple(sorted(U, key=lambda b: (b.start_address, b.id)))
    right = tuple(sorted(V, key=lambda b: (b.start_address, b.id)))
    edges = frozenset(
        (i, j)
        for i, u in enumerate(left)
        for j, v in enumerate(right)
        if u.labels & v.labels
    )
    return BipartiteGraph(left, right, edges)


def _fold(blocks) -> BasicBlock:
    blocks = sorted(blocks, key=lambda b: (b.start_address, b.id))
    acc = blocks[0]
    for b in blocks[1:]:
        acc = merge_blocks(acc, b)
    return acc


def bpair(U, V, *, function_name: str, left_config: BuildConfig, right_config: BuildConfig):
    """One equivalent pair per two-sided connected component.

    Returns ``(pairs, one_sided)`` where pairs are sorted by the left anchor
    address and ``one_sided`` lists components whose vertices all came from a
    single build.
    """
    graph = build_graph(U, V)
    n_left = len(graph.left)
    ds = _DisjointSet(n_left + len(graph.right))
    for i, j in graph.edges:
        ds.union(i, n_left + j)

    components: dict = {}
    for idx in range(n_left + len(graph.right)):
        components.setdefault(ds.find(idx), []).append(idx)

    pairs = []
    one_sided = []
    for members in components.values():
        lefts = [graph.left[i] for i in members if i < n_left]
        rights = [graph.right[i - n_left] for i in members if i >= n_left]
        if lefts and rights:
            left_merged = _fold(lefts)
            right_merged = _fold(rights)
            pairs.append(
                EquivalentPair(
                    left_block=left_merged,
                    right_block=right_merged,
                    function_name=function_name,
                    left_config=left_config,
                    right_config=right_config,
                    shared_labels=left_merged.labels & right_merged.labels,
                )
            )
        else:
            blocks = lefts or rights
            one_sided.append(
                OneSidedComponent(
                    function=function_name,
                    side="left" if lefts else "right",
                    block_ids=tuple(sorted(b.id for b in blocks)),
                )
            )
    pairs.sort(key=lambda p: p.left_block.start_address)
    one_sided.sort(key=lambda c: c.block_ids)
    return pairs, one_sided


def _match_key(name: str) -> str:
    """Function identity across builds: the symbol with any version suffix dropped."""
    at = name.find("@")
    return name[:at] if at > 0 else name


def pair_programs(dump_a: ProgramDump, dump_b: ProgramDump):
    """Pair every function the two annotated, bmerged dumps share by name.

    Returns ``(pairs, report)``; functions present on one side only and
    one-sided components land in the report.
    """
    left_funcs = {_match_key(f.name): f for f in dump_a.functions}
    right_funcs = {_match_key(f.name): f for f in dump_b.functions}

    report = UnmatchedReport(
        left_only_functions=sorted(set(left_funcs) - set(right_funcs)),
        right_only_functions=sorted(set(right_funcs) - set(left_funcs)),
    )
    pairs = []
    for name in sorted(set(left_funcs) & set(right_funcs)):
        func_pairs, one_sided = bpair(
            left_funcs[name].blocks,
            right_funcs[name].blocks,
            function_name=name,
            left_config=dump_a.config,
            right_config=dump_b.config,
        )
        pairs.extend(func_pairs)
        report.one_sided_components.extend(one_sided)
    return pairs, report
