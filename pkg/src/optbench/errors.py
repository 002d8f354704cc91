"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from OptbenchError,
so callers can catch one base class at the boundary.  The CLI maps the three
user-facing families to process exit codes: ConfigError -> 1, DataError and
its subclasses -> 2, NumericsError -> 3.
"""


class OptbenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(OptbenchError):
    """Invalid configuration: unknown names, out-of-range hyperparameters,
    geometry that does not tile, malformed CLI arguments."""


class DataError(OptbenchError):
    """Invalid or inconsistent data: bad labels, length mismatches,
    unreadable run records."""


class IdxFormatError(DataError):
    """An IDX file had a wrong magic number or malformed header."""


class TruncatedFileError(DataError):
    """A file ended before its declared payload was complete."""


class ShapeError(OptbenchError):
    """Tensor operands with incompatible shapes."""


class StateError(OptbenchError):
    """An API call that is invalid in the current state, such as backward
    before any forward pass, or an optimizer step on parameters that have
    no gradient."""


class NumericsError(OptbenchError):
    """A non-finite value appeared where the computation requires finite
    numbers (for example a NaN training loss)."""

    def __init__(self, message: str, *, epoch: int | None = None,
                 batch: int | None = None):
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
