"""Counter-based random streams.

A stream is keyed by (seed, index); every ray in a trace owns the stream at
its global ray index, which makes results independent of how rays are
partitioned across workers.
"""

from __future__ import annotations

import numpy as np

from . import _kernels


class RandomStream:
    """Splitmix64 stream with explicit state; cheap to fork by index."""

    __slots__ = ("_state",)

    def __init__(self, seed: int, index: int = 0):
        self._state = np.uint64(_kernels.stream_init(seed, index))

    @classmethod
    def for_ray(cls, seed: int, ray_index: int) -> "RandomStream":
        return cls(seed, ray_index)

    @property
    def state(self) -> np.uint64:
        return self._state

    @state.setter
    def state(self, value) -> None:
        self._state = np.uint64(value)

    def uniform(self) -> float:
        self._state, u = _kernels.rng_next(self._state)
        self._state = np.uint64(self._state)
        return float(u)

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        self._state = np.uint64(_kernels.fill_uniforms(self._state, out))
        return out
