"""Counter-based splittable random numbers.

Every uniform is a pure function of (seed, sample_index, counter), so samples
are reproducible regardless of evaluation order and batches can be distributed
across workers without sharing generator state.  Couplings come for free: the
same (seed, sample_index) reuses the same uniforms at every parameter value,
so bond configurations are monotone in p by construction.

The mixing function is splitmix64, vectorised over numpy uint64.
"""

from __future__ import annotations

import numpy as np

__all__ = ["uniforms", "uniform_block"]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _stream_key(seed: int, sample_index: int) -> np.uint64:
    with np.errstate(over="ignore"):
        k = _mix(np.uint64(seed % (1 << 64)) * _GAMMA + _GAMMA)
        k = _mix(k ^ _mix(np.uint64(sample_index % (1 << 64)) + _GAMMA))
    return np.uint64(k)


def uniforms(seed: int, sample_index: int, n: int) -> np.ndarray:
    """n uniforms in [0, 1) for one (seed, sample_index) stream."""
    key = _stream_key(seed, sample_index)
    with np.errstate(over="ignore"):
        ctr = np.arange(n, dtype=np.uint64) * _GAMMA + key
        bits = _mix(ctr)
    return bits.astype(np.float64) / float(1 << 64)


def uniform_block(seed: int, sample_lo: int, sample_hi: int, n: int) -> np.ndarray:
    """Uniforms for a contiguous range of samples, shape (sample_hi - sample_lo, n).

    Row i equals uniforms(seed, sample_lo + i, n) exactly.
    """
    k = sample_hi - sample_lo
    if k <= 0:
        return np.empty((0, n))
    keys = np.array([_stream_key(seed, s) for s in range(sample_lo, sample_hi)], dtype=np.uint64)
    with np.errstate(over="ignore"):
        ctr = np.arange(n, dtype=np.uint64)[None, :] * _GAMMA + keys[:, None]
        bits = _mix(ctr)
    return bits.astype(np.float64) / float(1 << 64)
