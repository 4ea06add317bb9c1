"""Counter-based random streams.

Every random number used by the simulator is a pure function of
``(seed, path, step, tag, index)``.  Values are produced by a vectorised
Philox4x64-10 block cipher, so paths can be split across workers in any
way without changing a single bit of output.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

__all__ = ["philox4x64", "seed_key", "StreamFactory"]

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def _mulhilo(a, b):
    a0, a1 = a & _LO32, a >> _S32
    b0, b1 = b & _LO32, b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _S32) + (p01 & _LO32) + (p10 & _LO32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, a * b


def philox4x64(counter, key, rounds=10):
    """Encrypt counters with Philox4x64.

    ``counter`` has shape (..., 4) and ``key`` shape (..., 2), both uint64
    and mutually broadcastable.  Returns an array of shape (..., 4).
    """
    counter = np.asarray(counter, dtype=np.uint64)
    key = np.asarray(key, dtype=np.uint64)
    shape = np.broadcast_shapes(counter.shape[:-1], key.shape[:-1])
    c0, c1, c2, c3 = (np.broadcast_to(counter[..., i], shape).copy() for i in range(4))
    k0 = np.broadcast_to(key[..., 0], shape).copy()
    k1 = np.broadcast_to(key[..., 1], shape).copy()
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def seed_key(seed: int) -> int:
    """Fold an arbitrary integer seed into 64 bits."""
    digest = hashlib.sha256(str(int(seed)).encode()).digest()
    return int.from_bytes(digest[:8], "little")


class StreamFactory:
    """Per-path random draws addressed by (step, tag, index).

    The Philox key is ``(path, hash(seed))``; the counter is
    ``(index, step, tag, 0)``.  Each counter yields four uniforms.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._k1 = np.uint64(seed_key(seed))

    def raw(self, paths, step, tag, index):
        paths = np.asarray(paths, dtype=np.uint64)
        key = np.empty(paths.shape + (2,), dtype=np.uint64)
        key[..., 0] = paths
        key[..., 1] = self._k1
        ctr = np.zeros(paths.shape + (4,), dtype=np.uint64)
        ctr[..., 0] = np.asarray(index, dtype=np.uint64)
        ctr[..., 1] = np.uint64(step)
        ctr[..., 2] = np.uint64(tag)
        return philox4x64(ctr, key)

    def uniform(self, paths, step, tag, count, offset=0):
        """Uniforms in the open interval (0, 1), shape (len(paths), count).

        ``offset`` (scalar or per-path array) selects the first counter
        block; consecutive blocks follow it.
        """
        paths = np.asarray(paths)
        blocks = -(-count // 4)
        out = np.empty((paths.shape[0], 4 * blocks))
        for b in range(blocks):
            bits = self.raw(paths, step, tag, np.asarray(offset, dtype=np.uint64) + np.uint64(b))
            out[:, 4 * b:4 * b + 4] = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return out[:, :count]

    def normal(self, paths, step, tag, count, offset=0):
        return ndtri(self.uniform(paths, step, tag, count, offset))
