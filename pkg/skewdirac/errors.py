import logging
from typing import Optional

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


class DiracError(Exception):
    """
    Base class for every error raised by skewdirac.

    Args:
        message (str): Human readable description.
        module (str): Name of the module that raised the error.
        index (Optional[int]): Grid node, cell, time step or z index involved, if any.
    """

    exit_code = 1

    def __init__(self, message: str, module: str = "", index: Optional[int] = None):
        self.message = message
        self.module = module
        self.index = index
        super().__init__(self.__str__())

    def __str__(self) -> str:
        where = self.module or "skewdirac"
        if self.index is not None:
            where = f"{where}[{self.index}]"
        return f"{where}: {self.message}"


class ValidationError(DiracError, ValueError):
    """Malformed input or a violated static invariant."""

    exit_code = 2


class DomainError(DiracError):
    """Numerical-domain failure (z outside the half-plane, breakdown, overflow)."""

    exit_code = 3


class OverflowDomainError(DomainError):
    pass


class CholeskyError(DomainError):
    pass


class ConditioningError(DomainError):
    pass


class TruncationError(DomainError):
    pass


class RankError(DomainError):
    pass


class ContinuityError(DomainError):
    pass


class PairError(DomainError):
    pass


class VerificationError(DiracError):
    """An invariant residual exceeded its tolerance."""

    exit_code = 4


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code.

    Args:
        error (BaseException): The exception raised during a run.

    Returns:
        int: 2 for validation, 3 for numerical domain, 4 for verification, 1 otherwise.
    """
    if isinstance(error, DiracError):
        return error.exit_code
    if isinstance(error, (ValueError, KeyError, OSError)):
        return 2
    return 1
