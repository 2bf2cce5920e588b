"""Exception types shared across the package."""


class NewscraftError(Exception):
    """Base class for all package errors."""


class TensorFormatError(NewscraftError):
    """A tensor file violates the on-disk format."""


class BadMagicError(TensorFormatError):
    """File does not start with the tensor magic bytes."""


class UnsupportedDtypeError(TensorFormatError):
    """Tensor file declares a dtype code this version cannot read."""


class TruncatedPayloadError(TensorFormatError):
    """Tensor payload is shorter than the header-declared size."""


class ManifestError(NewscraftError):
    """A dataset manifest is malformed or inconsistent with its blobs."""


class SplitError(NewscraftError):
    """A requested dataset split cannot be produced."""


class ConfigError(NewscraftError):
    """A model or run configuration violates its invariants."""


class FusionError(NewscraftError):
    """A fusion strategy was used where it does not apply."""


class TrainingDivergedError(NewscraftError):
    """Training produced a non-finite loss."""
