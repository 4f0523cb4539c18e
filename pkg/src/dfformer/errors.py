"""Exception hierarchy shared across the package.

Every error that callers are expected to catch is a subclass of DfformerError,
so the CLI can map the whole family to a single validation exit code while
tests can still assert on the specific kind.
"""


class DfformerError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(DfformerError):
    """Operand shapes are incompatible. The message names both shapes."""


class ContractError(DfformerError):
    """A documented precondition was violated (non-scalar loss, n < 4, ...)."""


class PlanError(DfformerError):
    """Input extents do not match a spectral plan."""


class BuildError(DfformerError):
    """A model configuration cannot be assembled (bad strides, extents...)."""


class ConfigError(DfformerError):
    """A config file failed to parse; message carries line and key context."""


class DataError(DfformerError):
    """A dataset file is malformed."""


class DataMagicError(DataError):
    """An IDX file's magic number is wrong for its role."""


class DataCountError(DataError):
    """Image and label files disagree on the number of records."""


class DataTruncatedError(DataError):
    """An IDX payload is shorter than its header promises."""


class CheckpointError(DfformerError):
    """Base class for checkpoint container problems."""


class CheckpointMagicError(CheckpointError):
    """Leading magic bytes are not 'DFCK'."""


class CheckpointVersionError(CheckpointError):
    """Container version is not supported."""


class CheckpointTruncatedError(CheckpointError):
    """Payload ended before the declared entries were read."""


class CheckpointNameError(CheckpointError):
    """An entry name does not match any parameter in the target model."""
