"""Order-preserving parallel map used by feature extraction."""
import os
import typing as t
from concurrent.futures import ThreadPoolExecutor

from monad_std import Option, Result

from ..error import UsageError

__all__ = [
    "THREADS_ENV",
    "thread_count",
    "ordered_map",
]

T = t.TypeVar("T")
U = t.TypeVar("U")

THREADS_ENV = "FORMANT_DA_THREADS"


def thread_count() -> int:
    """Worker count for parallel extraction.

    Reads `FORMANT_DA_THREADS`; without it, the logical core count is used.

    Raises:
        UsageError: The variable is set but is not a positive integer.
    """
    default = os.cpu_count() or 1
    return Option.from_nullable(os.environ.get(THREADS_ENV)).map(_parse_threads).unwrap_or(default)


def _parse_threads(raw: str) -> int:
    try:
        value = int(raw.strip())
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def ordered_map(func: t.Callable[[T], U], items: t.Sequence[T], threads: t.Optional[int] = None) -> t.List[Result[U, Exception]]:
    """Apply `func` to every item, catching failures per item.

    Results come back in input order whatever the worker count, so downstream
    aggregation stays deterministic.

    Examples:
        ```python
        out = ordered_map(lambda x: 1 // x, [1, 0])
        assert out[0] == Ok(1)
        assert isinstance(out[1].unwrap_err(), ZeroDivisionError)
        ```
    """
    workers = thread_count() if threads is None else threads
    if workers <= 1 or len(items) <= 1:
        return [Result.catch_from(func, item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(lambda item: Result.catch_from(func, item), items))
