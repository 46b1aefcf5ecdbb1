"""Thread fan-out with results returned in submission order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_default_threads = 1


def set_default_threads(n: int | None) -> None:
    global _default_threads
    _default_threads = max(1, int(n or os.cpu_count() or 1))


def default_threads() -> int:
    return _default_threads


def ordered_map(fn, items, threads: int | None = None) -> list:
    """map(fn, items), possibly threaded; output order always equals input order."""
    items = list(items)
    n = threads if threads is not None else _default_threads
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def chunks(n: int, parts: int) -> list[slice]:
    """Split range(n) into at most `parts` contiguous slices."""
    parts = max(1, min(parts, n))
    bounds = [n * i // parts for i in range(parts + 1)]
    return [slice(bounds[i], bounds[i + 1]) for i in range(parts)]
