"""Fine-grained equivalent basic-block pair dataset construction."""

from .bmerge import bmerge, merge_blocks
from .bpair import (
    BipartiteGraph,
    EquivalentPair,
    OneSidedComponent,
    UnmatchedReport,
    bpair,
    build_graph,
    pair_programs,
)
from .dataset import (
    CandidateBlock,
    CorpusStats,
    PairRecord,
    dedup,
    sample_negatives,
    truncate_and_split,
)
from .errors import (
    CoverageError,
    DuplicateSymbolError,
    EmptyLabelError,
    ManifestError,
    OverlapError,
    PipelineError,
    PoolExhaustedError,
    ResolverProtocolError,
    ResolverSpawnError,
    SchemaError,
    ToolchainMissingError,
    UnknownISAError,
)
from .ingest import (
    BasicBlock,
    BuildConfig,
    FunctionRecord,
    Instruction,
    ProgramDump,
    parse_dump,
    sanitize,
    serialize_dump,
)
from .linemap import (
    AnnotationCache,
    SourceLine,
    annotate_blocks,
    load_annotation_file,
    make_cache,
    resolve_addresses,
)
from .normalize import (
    NormalizedInstruction,
    normalize_block,
    normalize_instruction,
    normalize_text,
    render_block,
)

__version__ = "0.1.0"
