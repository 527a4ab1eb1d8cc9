"""Worker-count resolution and ordered thread fan-out"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "LINF_THREADS"


def resolve_threads(requested=0):
    """Resolve the worker cap: explicit value, then LINF_THREADS, then 1"""
    if requested and int(requested) > 0:
        return int(requested)
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            return 1
        return max(1, value)
    return 1


def parallel_map(fn, items, threads=1):
    """Apply fn to every item; results come back in item order

    Reductions over the result list therefore happen in a fixed order
    regardless of how many workers ran.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


# Rows per chunk for batched evaluation; distance layers build (n, out, in) tensors
EVAL_CHUNK = 128


def map_chunks(fn, arrays, threads=1, chunk=EVAL_CHUNK):
    """Run fn over row chunks of the given arrays and concatenate the results

    Args:
        fn (callable): Takes one chunk of each array, returns an array or a
            tuple of arrays with one row per input row
        arrays (list): Arrays sharing their first dimension
        threads (int): Worker cap
        chunk (int): Rows per call

    Returns:
        numpy.ndarray or tuple: Row-concatenated results, in input order
    """
    n = len(arrays[0])
    bounds = [(start, min(start + chunk, n)) for start in range(0, n, chunk)]
    results = parallel_map(lambda b: fn(*(a[b[0]:b[1]] for a in arrays)), bounds, threads)
    if not results:
        return fn(*(a[:0] for a in arrays))
    if isinstance(results[0], tuple):
        return tuple(np.concatenate(parts) for parts in zip(*results))
    return np.concatenate(results)
