"""Deterministic SplitMix64 random stream

The k-th draw of a stream seeded with s is mix(s + k*GAMMA mod 2**64), so the
scalar path and the vectorized numpy path produce identical values.
"""

import numpy as np

from utils.errors import InvalidRangeError, ParameterError

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
TO_UNIT = 1.0 / (1 << 53)


def _mix(z):
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Single-owner SplitMix64 generator"""

    def __init__(self, seed=0):
        self.seed = int(seed) & MASK64
        self.state = self.seed

    def spawn(self, stream_index):
        """Independent generator for a worker: seed = parent seed XOR index"""
        return Rng(self.seed ^ (int(stream_index) & MASK64))

    def next_u64(self):
        """Advance one step and return the raw 64-bit output"""
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def next_u64_array(self, count):
        """Advance ``count`` steps at once; identical to repeated next_u64"""
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GAMMA)
        self.state = (self.state + count * GAMMA) & MASK64
        return _mix_array(states)

    def uniform(self, lo=0.0, hi=1.0):
        """Uniform float in [lo, hi); advances exactly one step"""
        if lo > hi:
            raise InvalidRangeError(f"Invalid range: lo={lo} > hi={hi}")
        u = (self.next_u64() >> 11) * TO_UNIT
        return lo + (hi - lo) * u

    def uniform_array(self, shape, lo=0.0, hi=1.0):
        """Array of uniform floats in [lo, hi), filled in row-major order"""
        if lo > hi:
            raise InvalidRangeError(f"Invalid range: lo={lo} > hi={hi}")
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.next_u64_array(count)
        u = (raw >> np.uint64(11)).astype(np.float64) * TO_UNIT
        return (lo + (hi - lo) * u).reshape(shape)

    def randint(self, n):
        """Uniform integer in [0, n)"""
        if n < 1:
            raise ParameterError(f"randint needs n >= 1, got {n}")
        return min(int(self.uniform() * n), n - 1)

    def permutation(self, n):
        """Random permutation of range(n)"""
        keys = self.uniform_array(n)
        return np.argsort(keys, kind="stable")


def rng_uniform(rng, lo, hi):
    """Draw one uniform value in [lo, hi) from rng"""
    return rng.uniform(lo, hi)
