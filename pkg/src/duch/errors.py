"""Exception types shared across the library."""


class DuchError(Exception):
    """Base class for all library errors."""


class ShapeError(DuchError):
    """Operands of a matrix operation do not conform."""


class DegenerateBatchError(DuchError):
    """Batch statistics requested on a batch that is too small."""


class DegenerateVectorError(DuchError):
    """A zero-norm row reached an operation that needs a direction."""


class ConfigError(DuchError):
    """A configuration value violates its documented constraints."""


class TrainingDivergedError(DuchError):
    """A loss component became non-finite during training."""


class DatasetError(DuchError):
    """Base class for embedding-dataset ingestion problems."""


class ManifestError(DatasetError):
    """The manifest file is missing or cannot be parsed."""


class FormatVersionError(DatasetError):
    """The manifest declares an unsupported format version."""


class MissingBlobError(DatasetError):
    """A file referenced by the manifest does not exist."""


class BlobSizeError(DatasetError):
    """A blob's byte length disagrees with the manifest shape."""


class NonFiniteDataError(DatasetError):
    """An embedding row contains NaN or Inf."""


class CheckpointError(DuchError):
    """A model checkpoint file is malformed."""


class CodeFileError(DuchError):
    """A packed-code export file is malformed."""
