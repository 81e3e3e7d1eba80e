"""
Counter-based Gaussian increments.

Each block of particles at each Euler step gets a fresh
:class:`numpy.random.Philox` generator whose key is derived
from ``(seed, stream, block)`` and whose counter starts at the
step index. The increments for a given particle and step are
therefore independent of evaluation order and of the number
of worker threads.
"""
import concurrent.futures
from typing import Optional

import numpy as np

BLOCK_SIZE = 4096

STREAM_DYNAMICS = 0
STREAM_INITIAL = 1
STREAM_RESAMPLE = 2

_U64 = 2 ** 64


class NoiseStream:
    """
    Source of standard normal increments keyed by
    ``(seed, stream, particle block, step)``.

    Two simulations built on streams with the same seed and
    stream id receive identical increments, which is how
    synchronous couplings and common random numbers are
    realized.
    """

    def __init__(self, seed: int, stream: int = STREAM_DYNAMICS):
        if not 0 <= seed < _U64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if not 0 <= stream < 2 ** 32:
            raise ValueError(f"stream must fit in 32 bits, got {stream}")
        self._seed = seed
        self._stream = stream

    @property
    def seed(self) -> int:
        return self._seed

    def generator(self, block: int, step: int) -> np.random.Generator:
        """
        Return the generator for particle *block* at *step*.
        """
        key = np.array([self._seed, (self._stream << 32) | block], dtype=np.uint64)
        counter = np.array([0, 0, step, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def block(self, step: int, block: int, size: int, dim: int) -> np.ndarray:
        return self.generator(block, step).standard_normal((size, dim))

    def normals(
        self,
        step: int,
        n: int,
        dim: int,
        executor: Optional[concurrent.futures.Executor] = None,
    ) -> np.ndarray:
        """
        Return an ``(n, dim)`` array of independent standard normals
        for *step*.
        """
        out = np.empty((n, dim))

        def fill(index: int):
            start = index * BLOCK_SIZE
            stop = min(n, start + BLOCK_SIZE)
            out[start:stop] = self.block(step, index, stop - start, dim)

        blocks = range(-(-n // BLOCK_SIZE))
        if executor is None or len(blocks) == 1:
            for index in blocks:
                fill(index)
        else:
            list(executor.map(fill, blocks))
        return out


def block_slices(n: int):
    """
    The fixed particle partition shared by noise generation
    and the per-block state updates.
    """
    return [slice(start, min(n, start + BLOCK_SIZE)) for start in range(0, n, BLOCK_SIZE)]
