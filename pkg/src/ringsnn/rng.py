"""Counter-based uniform draws keyed by (seed, neuron, step).

Every draw is a pure function of its key, so any scheduler that visits the
same (neuron, step) pairs sees the same numbers.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STEP_MUL = np.uint64(0xD6E8FEB86659FD93)

# stream tags for draws that are not tied to a simulation step
STREAM_INIT_V = (1 << 62) + 1


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def hash64(seed: int, neuron, step) -> np.ndarray:
    neuron = np.atleast_1d(np.asarray(neuron, dtype=np.uint64))
    step = np.asarray(step).astype(np.uint64) if isinstance(step, np.ndarray) else \
        np.uint64(int(step) & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        key = _mix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64) + _GOLDEN)
        x = _mix(key + (neuron + np.uint64(1)) * _GOLDEN)
        return _mix(x ^ ((step + np.uint64(1)) * _STEP_MUL))


def uniform(seed: int, neuron, step) -> np.ndarray:
    """Uniform doubles in [0, 1); ``neuron`` and ``step`` broadcast."""
    return (hash64(seed, neuron, step) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
