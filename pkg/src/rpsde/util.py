"""Replica-block scheduling.

Per-replica values in this toolkit depend only on the replica's derived seed,
never on batch membership, so any partition of the index range gives the same
numbers.  Aggregation happens after reassembly, in index order, which keeps
every statistic identical across worker counts.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["run_blocks"]


def _block_ranges(n: int, block: int):
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


def run_blocks(n: int, workers: int, block_size: int, fn):
    """Apply ``fn(lo, hi) -> array`` over [0, n) in blocks; concatenate in order.

    ``workers`` > 1 runs blocks on a thread pool (the heavy kernels drop the
    GIL); the result is the same arrays in the same order either way.
    """
    ranges = _block_ranges(n, block_size)
    if workers <= 1 or len(ranges) == 1:
        parts = [fn(lo, hi) for lo, hi in ranges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: fn(*r), ranges))
    return np.concatenate(parts, axis=0)
