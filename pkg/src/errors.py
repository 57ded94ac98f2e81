"""Exception types and their command-line exit codes."""

from typing import Optional, Tuple


class UnmixingError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1


class ConfigError(UnmixingError, ValueError):
    """Invalid configuration value or command-line usage."""

    exit_code = 2


class DataError(UnmixingError, ValueError):
    """Input data is malformed or inconsistent."""

    exit_code = 3


class DimensionMismatchError(DataError):
    """Two operands have incompatible shapes."""

    def __init__(self, first: str, first_shape: Tuple[int, ...],
                 second: str, second_shape: Tuple[int, ...], detail: str = ""):
        self.first = first
        self.second = second
        self.first_shape = tuple(first_shape)
        self.second_shape = tuple(second_shape)
        message = (
            f"{first} {_fmt_shape(first_shape)} and {second} {_fmt_shape(second_shape)} "
            f"are incompatible"
        )
        if detail:
            message += f": {detail}"
        super().__init__(message)


class MatrixFormatError(DataError):
    """A matrix file could not be decoded."""


class MissingFileError(DataError, FileNotFoundError):
    """An input file does not exist."""


class RankDeficientError(DataError):
    """Data spans fewer directions than the requested number of endmembers."""


class ZeroMeanBandError(DataError):
    """A spectral band has zero empirical mean and cannot be normalized."""

    def __init__(self, band: int):
        self.band = band
        super().__init__(f"band {band} has zero mean over the pixels")


class ZeroColumnError(DataError):
    """A spectrum has zero norm, so its angle is undefined."""


class SolverError(UnmixingError, RuntimeError):
    """Numerical failure inside an optimization routine."""

    exit_code = 4


class InactiveBlockError(SolverError):
    """A factor block was requested that the model variant does not estimate."""


class NonFiniteGradientError(SolverError):
    """A partial gradient contains NaN or Inf."""

    def __init__(self, block: str, iteration: int):
        self.block = block
        self.iteration = iteration
        super().__init__(f"non-finite gradient for block {block} at iteration {iteration}")


class InfeasibleStateError(SolverError):
    """A factor block violates its constraint set."""


class ObjectiveIncreaseError(SolverError):
    """The objective went up between two iterations."""

    def __init__(self, iteration: int, previous: float, current: float):
        self.iteration = iteration
        self.previous = previous
        self.current = current
        super().__init__(
            f"objective increased at iteration {iteration}: {previous!r} -> {current!r}"
        )


class ConvergenceError(SolverError):
    """An inner iterative routine hit its iteration cap."""


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit code.

    Args:
        error: Raised exception.

    Returns:
        2 for configuration errors, 3 for data errors, 4 for solver failures, 1 otherwise.
    """
    if isinstance(error, UnmixingError):
        return error.exit_code
    return 1


def _fmt_shape(shape: Optional[Tuple[int, ...]]) -> str:
    if shape is None:
        return "(missing)"
    return "(" + "x".join(str(s) for s in shape) + ")"
