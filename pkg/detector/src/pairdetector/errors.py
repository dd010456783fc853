class DetectorError(Exception):
    """Base class for detector failures."""


class SchemaError(DetectorError):
    """A dataset line does not match the pair-record schema."""

    def __init__(self, message, line_no=None):
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)
        self.line_no = line_no


class SingleClassError(DetectorError):
    """The dataset contains only one label class; training is meaningless."""


class SequenceTooLongError(DetectorError):
    """A pair still exceeds the configured token budget after truncation."""
