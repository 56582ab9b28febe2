"""Deterministic pseudo-randomness for samplers and training.

Every random decision in the package flows from 64-bit stream keys built by
``stream_key(master_seed, domain, ...)``: reruns with the same keys consume
bit-identical streams regardless of chunking or thread count.  The generator
is xoshiro256** advanced in lockstep "lanes" (one independent generator per
lane, all stepped together), which lets the Monte Carlo sweeps and the
network initialiser draw whole blocks of uniforms in one vectorised call.
Lane states are filled with the splitmix64 recipe recommended for the
xoshiro family.

Lane layout conventions (documented so outputs are reproducible across
reimplementations of the same scheme):

* samplers use one lane per (chain, site), keyed
  ``stream_key(master_seed, domain, beta_index, chain_index, site)``,
  and draw one block per sweep (plus one block for hot-start initial states);
* block consumers (network init, shuffles, dropout) derive a fresh bundle
  per call, keyed ``stream_key(base_key, call_counter)``.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Domain tags keep streams of different consumers disjoint under one master
# seed.  Values are arbitrary but frozen: changing them changes every output.
DOMAIN_IGT = 1
DOMAIN_TORIC_X = 2
DOMAIN_TORIC_Z = 3
DOMAIN_FIELD = 4
DOMAIN_NN = 5
DOMAIN_STABILIZER = 6


def mix64(x: int) -> int:
    """splitmix64 finaliser on a Python int, reduced mod 2**64."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def _mix64_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MIX1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MIX2)
    x ^= x >> np.uint64(31)
    return x


def stream_key(*parts: int) -> int:
    """Fold integers into a 64-bit stream key (order-sensitive)."""
    key = 0
    for part in parts:
        key = mix64((key ^ (int(part) & _MASK64)) + _GOLDEN)
    return key


def stream_key_np(*parts) -> np.ndarray:
    """Vectorised ``stream_key``: parts broadcast to a common shape."""
    shape = np.broadcast_shapes(*(np.shape(p) for p in parts))
    key = np.zeros(shape, dtype=np.uint64)
    for part in parts:
        arr = np.asarray(part)
        if arr.dtype.kind not in "ui":
            arr = arr.astype(np.int64)
        key = _mix64_np((key ^ arr.astype(np.uint64)) + np.uint64(_GOLDEN))
    return key


class LaneRng:
    """Bundle of independent xoshiro256** generators advanced in lockstep.

    ``lane_keys`` gives one 64-bit key per lane; state word j of a lane is
    ``mix64(mix64(lane_key) + (j+1) * golden)``.
    """

    def __init__(self, lane_keys: np.ndarray):
        lane_keys = np.atleast_1d(np.asarray(lane_keys, dtype=np.uint64)).ravel()
        if lane_keys.size < 1:
            raise ValueError("need at least one lane")
        self.lanes = int(lane_keys.size)
        base = _mix64_np(lane_keys)
        self._s = [
            _mix64_np(base + np.uint64(((j + 1) * _GOLDEN) & _MASK64))
            for j in range(4)
        ]

    @classmethod
    def keyed(cls, key: int, lanes: int) -> "LaneRng":
        """Bundle with lanes keyed ``stream_key(key, lane_index)``."""
        return cls(stream_key_np(key, np.arange(lanes, dtype=np.int64)))

    def next_u64(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniforms(self) -> np.ndarray:
        """One float64 per lane, uniform on [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class BlockRng:
    """Counter-mode uniforms of arbitrary shape from one stream key.

    Each call derives a fresh lane bundle keyed ``stream_key(key, counter)``
    and draws exactly once, so a call's values depend only on the key and the
    call index, never on the sizes of earlier calls.
    """

    def __init__(self, key: int):
        self.key = key
        self._counter = 0

    def uniforms(self, shape) -> np.ndarray:
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        count = max(int(np.prod(shape)), 1) if shape else 1
        rng = LaneRng.keyed(stream_key(self.key, self._counter), count)
        self._counter += 1
        return rng.uniforms()[:count].reshape(shape)

    def permutation(self, count: int) -> np.ndarray:
        return np.argsort(self.uniforms(count), kind="stable")

    def integer(self, bound: int) -> int:
        return int(self.uniforms(1)[0] * bound)
