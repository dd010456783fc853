"""Exception types shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(PipelineError):
    """A dump file violates the JSON dump schema.

    ``path`` points at the offending record, e.g.
    ``functions[2].blocks[0].instructions[1].addr``.
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class OverlapError(SchemaError):
    """Two basic blocks of one function cover overlapping address ranges."""


class DuplicateSymbolError(SchemaError):
    """The same function symbol appears twice in one dump."""


class ResolverSpawnError(PipelineError):
    """The external address resolver executable could not be started."""


class ResolverProtocolError(PipelineError):
    """The resolver produced output we cannot parse; the offending line is kept verbatim."""

    def __init__(self, line):
        super().__init__(f"unparseable resolver output line: {line!r}")
        self.line = line


class CoverageError(PipelineError):
    """An instruction address was not covered by the annotation cache."""


class EmptyLabelError(PipelineError):
    """A block with an empty label set reached a stage that requires annotations."""


class UnknownISAError(PipelineError):
    """An ISA name outside the supported set was requested."""


class PoolExhaustedError(PipelineError):
    """No admissible negative-sampling partner exists for a record."""


class ToolchainMissingError(PipelineError):
    """A requested external compiler is not installed on this host."""


class ManifestError(PipelineError):
    """The run manifest is structurally invalid."""
