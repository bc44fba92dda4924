from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar
import threading

from .config import THREADS

T = TypeVar("T")
R = TypeVar("R")

_lock = threading.Lock()
_threads = max(1, THREADS)
_executor: Optional[ThreadPoolExecutor] = None


def set_threads(n: int) -> None:
    """Resize the shared pool; takes effect on the next submission."""
    global _threads, _executor
    with _lock:
        _threads = max(1, int(n))
        if _executor is not None:
            _executor.shutdown(wait=True)
            _executor = None


def get_threads() -> int:
    return _threads


def _get_executor() -> ThreadPoolExecutor:
    global _executor
    with _lock:
        if _executor is None:
            _executor = ThreadPoolExecutor(max_workers=_threads, thread_name_prefix="modexp")
        return _executor


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Apply fn to every item; results come back in input order."""
    items = list(items)
    if _threads == 1 or len(items) <= 1 or threading.current_thread().name.startswith("modexp"):
        # nested calls run inline so pool workers never wait on each other
        return [fn(item) for item in items]
    return list(_get_executor().map(fn, items))
