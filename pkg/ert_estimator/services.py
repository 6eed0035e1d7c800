"""
Services shared by the transform, estimator and risk modules: the worker pool
and the exception hierarchy.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .utils import Config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ParallelRunner:
    """Runs independent work items on a thread pool.

    Results always come back in submission order, so any reduction done by the
    caller over them is independent of how the pool scheduled the work.
    """

    def __init__(self, threads: Optional[int] = None):
        self.threads = Config.resolve_threads(threads)

    def map_ordered(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply ``func`` to every item; the i-th result belongs to the i-th item."""
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [func(item) for item in items]

        logger.debug(f"Dispatching {len(items)} items to {self.threads} workers")
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))

    @staticmethod
    def sequential() -> "ParallelRunner":
        return ParallelRunner(threads=1)


def resolve_runner(runner: Optional[ParallelRunner]) -> ParallelRunner:
    """Library calls default to sequential execution unless handed a pool."""
    return runner if runner is not None else ParallelRunner.sequential()


# Exception classes for better error handling
class ERTError(Exception):
    """Base class for errors raised by the estimator library."""
    pass


class InvalidArgumentError(ERTError, ValueError):
    """Exception raised when an argument violates an operation's precondition."""
    pass


class OutOfDomainError(ERTError, ValueError):
    """Exception raised when a point lies outside the unit ball."""
    pass


class UnsupportedNoiseError(ERTError):
    """Exception raised when a noise model has no density for the requested check."""
    pass


class ComputationDeclinedError(InvalidArgumentError):
    """Exception raised when inputs are degenerate and a computation is refused."""
    pass


class ConfigurationError(ERTError):
    """Exception raised when a run configuration is invalid."""
    pass


__all__ = [
    'ParallelRunner', 'resolve_runner',
    'ERTError', 'InvalidArgumentError', 'OutOfDomainError', 'UnsupportedNoiseError',
    'ComputationDeclinedError', 'ConfigurationError',
]
