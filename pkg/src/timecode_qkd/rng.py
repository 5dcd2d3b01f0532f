"""Counter-based random streams.

Every pulse of a session owns an independent substream addressed by
``(seed, pulse_index, slot)``. Values come from Philox4x32-10 evaluated
directly on the counter, so any subset of pulses can be generated in any
order, by any number of workers, and still yield identical draws.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
ROUNDS = 10


def philox4x32(counter, key, rounds: int = ROUNDS) -> np.ndarray:
    """Philox4x32 block function, vectorized over counters.

    Args:
        counter: array of shape ``(..., 4)`` of uint32 counter words.
        key: pair of uint32 key words, shared by all counters.

    Returns:
        Array of the same shape as ``counter`` holding the output words.
    """
    ctr = np.asarray(counter, dtype=np.uint32)
    c0, c1, c2, c3 = (ctr[..., i].astype(np.uint64) for i in range(4))
    k0 = np.uint32(key[0])
    k1 = np.uint32(key[1])
    for r in range(rounds):
        if r:
            k0 = np.uint32((int(k0) + int(_W0)) & 0xFFFFFFFF)
            k1 = np.uint32((int(k1) + int(_W1)) & 0xFFFFFFFF)
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


class CounterStream:
    """Uniform variates as a pure function of (seed, index, slot).

    Each Philox block yields two 53-bit doubles, so slot ``s`` lives in
    block ``s // 2``.
    """

    def __init__(self, seed: int, domain: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.domain = int(domain) & 0xFFFFFFFF
        self._key = _split_seed(self.seed)

    def uniforms(self, indices, slot: int) -> np.ndarray:
        """Doubles in [0, 1) for each index at the given slot."""
        idx = np.asarray(indices, dtype=np.uint64)
        ctr = np.empty(idx.shape + (4,), dtype=np.uint32)
        ctr[..., 0] = (idx & _MASK32).astype(np.uint32)
        ctr[..., 1] = (idx >> _SHIFT32).astype(np.uint32)
        ctr[..., 2] = np.uint32(slot // 2)
        ctr[..., 3] = np.uint32(self.domain)
        out = philox4x32(ctr, self._key).astype(np.uint64)
        half = 2 * (slot % 2)
        a = out[..., half] >> np.uint64(5)
        b = out[..., half + 1] >> np.uint64(6)
        return (a * np.uint64(67108864) + b).astype(np.float64) * (1.0 / 9007199254740992.0)

    def generator(self, index: int) -> np.random.Generator:
        """A numpy Generator private to one index, for scalar helpers."""
        ss = np.random.SeedSequence([self.seed, self.domain, int(index)])
        return np.random.Generator(np.random.Philox(ss))
