"""Minimum l_inf distance between differently labelled samples"""

import threading

import numpy as np

from utils.errors import ParameterError, UndefinedGapError
from utils.net_types import GAP_DEFAULT_LIMIT
from utils.parallel import parallel_map

ROW_BLOCK = 64
FEATURE_CHUNK = 64
GAP_UNITS = ("auto", "raw", "features")


def gap_values(ds, units="auto"):
    """The matrix the gap is measured on and its unit name"""
    if units not in GAP_UNITS:
        raise ParameterError(f"Unknown gap units '{units}', expected one of {GAP_UNITS}")
    if units == "raw" and ds.raw is None:
        raise ParameterError(f"Dataset '{ds.name}' has no raw bytes; use units=features")
    if units == "features" or ds.raw is None:
        return ds.features, "features"
    # int16 so differences of uint8 values do not wrap
    return ds.raw.astype(np.int16), "raw"


def _row_block_min(values, labels, start, stop, bound):
    """Smallest cross-label distance from rows [start, stop) to later rows

    Pairs are dropped as soon as their running max reaches the best value
    seen so far.
    """
    best = bound
    d = values.shape[1]
    for i in range(start, stop):
        cand = np.flatnonzero(labels[i + 1:] != labels[i]) + i + 1
        running = np.zeros(cand.size, dtype=values.dtype)
        for c0 in range(0, d, FEATURE_CHUNK):
            if cand.size == 0:
                break
            chunk = np.abs(values[cand, c0:c0 + FEATURE_CHUNK] - values[i, c0:c0 + FEATURE_CHUNK]).max(axis=1)
            running = np.maximum(running, chunk)
            keep = running < best
            cand, running = cand[keep], running[keep]
        if cand.size:
            best = min(best, running.min())
    return best


def class_gap(ds, limit=GAP_DEFAULT_LIMIT, units="auto", threads=1):
    """Min over differently labelled pairs of the l_inf distance

    Args:
        ds (Dataset): Samples; raw 0-255 bytes are used when present (units 'auto')
        limit (int): Only the first `limit` samples; None or 0 means all of them
        units (str): 'auto', 'raw' (0-255) or 'features' ([0, 1])
        threads (int): Worker cap; row blocks run in parallel

    Returns:
        float: The gap in the chosen units

    Raises:
        UndefinedGapError: fewer than two classes among the considered samples
    """
    values, _ = gap_values(ds, units)
    labels = ds.labels
    if limit:
        values, labels = values[:limit], labels[:limit]
    if np.unique(labels).size < 2:
        raise UndefinedGapError(f"Dataset '{ds.name}' has a single class among {len(labels)} samples")

    lock = threading.Lock()
    shared = [np.inf]

    def run_block(start):
        with lock:
            current = shared[0]
        result = _row_block_min(values, labels, start, min(start + ROW_BLOCK, len(labels)), current)
        with lock:
            shared[0] = min(shared[0], result)
        return result

    results = parallel_map(run_block, range(0, len(labels), ROW_BLOCK), threads)
    return float(min(results))
