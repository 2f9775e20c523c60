"""Counter-based random number streams.

Each Monte Carlo path owns a stream derived from (master_seed, stream_id) by a
splitmix64-style hash, so batches parallelize deterministically: the draws of
path i never depend on how many other paths run or in what order. The core
functions are numba-jitted and shared with the walk kernels, which keeps the
single-path and batched simulators bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD2B74407B1CE6E93)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True, inline="always")
def _finalize(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def stream_state(master_seed, stream_id):
    """Initial state of the stream (master_seed, stream_id)."""
    h = _finalize(np.uint64(master_seed) + _GOLDEN)
    k = _finalize(np.uint64(stream_id) ^ _STREAM_SALT)
    return _finalize(h ^ (k + _GOLDEN))


@njit(cache=True, nogil=True, inline="always")
def next_uniform(state):
    """Advance the state; returns (new_state, uniform in [0, 1))."""
    state = state + _GOLDEN
    z = _finalize(state)
    return state, (z >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def next_gaussian_pair(state):
    """Advance the state by two draws; returns (new_state, n1, n2) via Box-Muller."""
    state, u1 = next_uniform(state)
    state, u2 = next_uniform(state)
    # shift u1 into (0, 1] so the log is finite
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    theta = 2.0 * np.pi * u2
    return state, r * np.cos(theta), r * np.sin(theta)


@dataclass(frozen=True)
class RngSpec:
    """Identity of one random stream; same pair always reproduces the same draws."""

    master_seed: int
    stream_id: int = 0

    def stream(self) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id)


class RngStream:
    """Stateful scalar view of a stream, for non-kernel consumers."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        # keep the state a numpy uint64 scalar: jitted callees must always see
        # the unsigned type or the splitmix arithmetic silently breaks
        self._state = np.uint64(
            stream_state(
                np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF),
                np.uint64(stream_id & 0xFFFFFFFFFFFFFFFF),
            )
        )

    def uniform(self) -> float:
        state, u = next_uniform(self._state)
        self._state = np.uint64(state)
        return float(u)

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n)
        for i in range(n):
            out[i] = self.uniform()
        return out
