"""Counter-based random number generation with independent streams.

Random draws come from the Philox-4x32-10 counter-based generator (Salmon
et al. 2011).  A draw is a pure function of (seed, stream id, draw index),
so any number of streams can be consumed concurrently, in any interleaving,
and reproduce bit-identical sequences.  Simulation code assigns one stream
per path, which makes results invariant under the worker count.

Two front ends share the same keyed counter function:

* :class:`RngStream` -- a single sequential stream (seed, stream id).
* :class:`RngLanes`  -- a vector of streams advanced lane-by-lane, used by
  the batched walkers.  Each lane only ever consumes draws from its own
  stream, so a lane's sequence does not depend on its batch mates.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_U64 = np.uint64


def splitmix64(x: int) -> int:
    """One SplitMix64 step; used to spread user seeds over 64 bits."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def derive_seed(seed: int, salt: int) -> int:
    """Deterministic child seed, e.g. one per sweep point or replication."""
    return splitmix64(splitmix64(seed) ^ splitmix64(salt + 1))


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox-4x32-10 block function on uint64 arrays holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _U64(32)
        lo0 = p0 & _MASK32
        hi1 = p1 >> _U64(32)
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _uniforms(seed_mixed: int, streams, indices):
    """Open-interval (0,1) doubles for given (stream, draw index) pairs.

    One Philox block yields 128 bits; draw ``i`` of a stream uses block
    ``i >> 1`` and selects the high or low 64-bit half by ``i & 1``.
    """
    streams = np.asarray(streams, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.uint64)
    block = indices >> _U64(1)
    c0 = block & _MASK32
    c1 = block >> _U64(32)
    c2 = streams & _MASK32
    c3 = streams >> _U64(32)
    k0 = _U64(seed_mixed & 0xFFFFFFFF)
    k1 = _U64(seed_mixed >> 32)
    y0, y1, y2, y3 = philox4x32(c0, c1, c2, c3, k0, k1)
    odd = (indices & _U64(1)).astype(bool)
    hi = np.where(odd, y2, y0)
    lo = np.where(odd, y3, y1)
    bits = (hi << _U64(32)) | lo
    # top 53 bits, offset by half an ulp so the result is never 0.0 or 1.0
    return ((bits >> _U64(11)).astype(np.float64) + 0.5) * (2.0**-53)


class RngStream:
    """Sequential stream of uniforms identified by (seed, stream id)."""

    __slots__ = ("seed", "stream", "counter", "_mixed")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = 0
        self._mixed = splitmix64(self.seed)

    def uniform(self, size: int | None = None):
        """Next uniform(s) in (0,1); advances the counter by the draw count."""
        n = 1 if size is None else int(size)
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        u = _uniforms(self._mixed, np.full(n, self.stream, dtype=np.uint64), idx)
        return float(u[0]) if size is None else u

    def normal(self, size: int | None = None):
        from scipy.special import ndtri

        u = self.uniform(size)
        return ndtri(u)

    def exponential(self, size: int | None = None):
        return -np.log(self.uniform(size))

    def spawn(self, stream: int) -> "RngStream":
        """Fresh stream with the same seed and a different stream id."""
        return RngStream(self.seed, stream)


class RngLanes:
    """Parallel per-lane streams with independent counters.

    ``uniform(idx)`` draws one uniform for each lane listed in ``idx`` and
    advances only those lanes' counters, so each lane's draw sequence is a
    pure function of (seed, its stream id) regardless of which other lanes
    are active.
    """

    __slots__ = ("seed", "streams", "counters", "_mixed")

    def __init__(self, seed: int, streams):
        self.seed = int(seed)
        self.streams = np.asarray(streams, dtype=np.uint64)
        self.counters = np.zeros(self.streams.shape, dtype=np.uint64)
        self._mixed = splitmix64(self.seed)

    def __len__(self) -> int:
        return self.streams.size

    def uniform(self, idx) -> np.ndarray:
        u = _uniforms(self._mixed, self.streams[idx], self.counters[idx])
        self.counters[idx] += _U64(1)
        return u

    def uniform_block(self, idx, k: int) -> np.ndarray:
        """(len(idx), k) uniforms; k consecutive draws per listed lane."""
        base = self.counters[idx]
        indices = base[:, None] + np.arange(k, dtype=np.uint64)[None, :]
        streams = np.broadcast_to(self.streams[idx][:, None], indices.shape)
        u = _uniforms(self._mixed, streams.ravel(), indices.ravel())
        self.counters[idx] += _U64(k)
        return u.reshape(len(base), k)

    def normal_block(self, idx, k: int) -> np.ndarray:
        from scipy.special import ndtri

        return ndtri(self.uniform_block(idx, k))
