"""Exception hierarchy shared by all opflow modules."""


class OpflowError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(OpflowError):
    """Operand shapes or field dimensionalities do not conform."""


class ConfigurationError(OpflowError):
    """A config value is outside its documented domain (extents, modes, dt, ...)."""


class ContractError(OpflowError):
    """An API precondition was violated (non-scalar loss, bad plan, ...)."""


class NonFiniteError(OpflowError):
    """A forward op produced NaN or Inf, which is an error state for arrays."""


class InstabilityError(OpflowError):
    """A time integration blew up; the message names the time reached."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class KernelError(OpflowError):
    """A covariance kernel produced a significantly negative spectral coefficient."""


class MetricError(OpflowError):
    """The relative-error metric is undefined (zero reference norm)."""


class TrainingDivergedError(OpflowError):
    """A loss term went non-finite during training; names the offending term."""

    def __init__(self, term: str, epoch: int, iteration: int):
        super().__init__(
            f"loss term '{term}' became non-finite at epoch {epoch}, iteration {iteration}"
        )
        self.term = term
        self.epoch = epoch
        self.iteration = iteration


class ContainerError(OpflowError):
    """Base class for persistence-format failures."""


class BadMagicError(ContainerError):
    """File does not start with the container magic."""


class ChecksumMismatchError(ContainerError):
    """Stored CRC32 does not match the file contents."""


class TruncatedPayloadError(ContainerError):
    """Payload is shorter than the record table in the header declares."""


class UnsupportedVersionError(ContainerError):
    """Container was written by an incompatible (newer) major format version."""


class CoverageError(OpflowError):
    """An evaluation requested a time with no stored ground truth."""
