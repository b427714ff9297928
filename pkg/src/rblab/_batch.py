"""Chunked evaluation over large point sets."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ._accel import thread_count

# floats of scratch per chunk; the widest contraction is ~n^5 * pairs per point
_BUDGET = 2.5e7


def chunk_size(n: int, pairs: int) -> int:
    return int(max(16, min(4096, _BUDGET // max(1, n ** 5 * pairs))))


def map_points(fn: Callable[[np.ndarray], dict], points: np.ndarray, chunk: int) -> dict:
    """Apply ``fn`` to row blocks of ``points`` and concatenate the returned arrays.

    Results are gathered in block order before any reduction, so sums taken
    afterwards do not depend on the worker count.
    """
    blocks = [points[i:i + chunk] for i in range(0, len(points), chunk)]
    workers = thread_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, blocks))
    else:
        parts = [fn(b) for b in blocks]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
