"""Exception types shared across the package."""


class SepsisAIError(Exception):
    """Base class for all domain errors."""


class ParseError(SepsisAIError):
    """Malformed record in a cohort file. Carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SchemaError(SepsisAIError):
    """Record references a feature or value the schema does not define."""


class DuplicateRecordError(SepsisAIError):
    """Two records claim the same (patient, time, feature) observation."""


class DivergenceError(SepsisAIError):
    """Training loss became non-finite. Carries the offending epoch."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


class InsufficientNeighborsError(SepsisAIError):
    """A cue was requested over an empty or too-small neighbor set."""


class AssignmentError(SepsisAIError):
    """Session assignment constraints cannot be satisfied."""


class SequencingError(SepsisAIError):
    """A decision was submitted for a slot that is not the current one."""


class ValidationError(SepsisAIError):
    """A recorded decision or request payload violates its bounds."""


class CheckpointError(SepsisAIError):
    """A model or index checkpoint is corrupt or mismatched."""
