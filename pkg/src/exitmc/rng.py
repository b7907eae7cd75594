"""Reproducible, splittable noise streams.

Every normal variate in a simulation is addressed by a logical position
(seed, level, sample, role, split, word-index) rather than drawn from shared
sequential state.  This makes results bit-identical for a given seed no
matter how samples are batched or how many threads execute them, and it lets
split continuations spawn data-dependently without perturbing other streams.

The generator is Philox4x64-10 evaluated as a pure function of (key, counter);
the kernel is validated bit-for-bit against ``numpy.random.Philox`` in the
test suite.  Uniforms take the top 53 bits of each 64-bit word and normals
are produced by the inverse CDF, so the stream contract is distributional
and deterministic within one build.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

# old TBB builds make numba emit a warning when its parallel backend loads;
# it falls back to another layer and results are unaffected
warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")

import numba
from numba import njit, prange

# Philox4x64 round multipliers and Weyl key increments (Salmon et al. 2011).
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_MASK64 = 0xFFFFFFFFFFFFFFFF

ROLE_JOINT = 0
ROLE_FINE_SPLIT = 1
ROLE_COARSE_SPLIT = 2

_ROLE_BITS = 2
_SPLIT_BITS = 32


@njit(cache=True, inline="always")
def _philox_block(c0, c1, c2, c3, k0, k1):
    x0, x1, x2, x3 = c0, c1, c2, c3
    key0, key1 = k0, k1
    for _ in range(10):
        a = x0
        al = a & _MASK32
        ah = a >> np.uint64(32)
        lo0 = a * _M0
        albh = al * (_M0 >> np.uint64(32))
        mid = ah * (_M0 & _MASK32) + ((al * (_M0 & _MASK32)) >> np.uint64(32)) + (albh & _MASK32)
        hi0 = ah * (_M0 >> np.uint64(32)) + (albh >> np.uint64(32)) + (mid >> np.uint64(32))
        a = x2
        al = a & _MASK32
        ah = a >> np.uint64(32)
        lo1 = a * _M1
        albh = al * (_M1 >> np.uint64(32))
        mid = ah * (_M1 & _MASK32) + ((al * (_M1 & _MASK32)) >> np.uint64(32)) + (albh & _MASK32)
        hi1 = ah * (_M1 >> np.uint64(32)) + (albh >> np.uint64(32)) + (mid >> np.uint64(32))
        x0 = hi1 ^ x1 ^ key0
        x1 = lo1
        x2 = hi0 ^ x3 ^ key1
        x3 = lo0
        key0 += _W0
        key1 += _W1
    return x0, x1, x2, x3


@njit(cache=True, parallel=True)
def _fill_words(k0, k1, c1, c2, starts, count, out):
    # out[i, j] = word number starts[i]+j of the stream keyed by (c1[i], c2[i]);
    # each Philox block yields four words, selected by the low counter bits.
    for i in prange(c1.shape[0]):
        tick = np.uint64(0xFFFFFFFFFFFFFFFF)
        w0 = w1 = w2 = w3 = np.uint64(0)
        for j in range(count):
            idx = starts[i] + np.uint64(j)
            t = idx >> np.uint64(2)
            if t != tick:
                tick = t
                w0, w1, w2, w3 = _philox_block(tick, c1[i], c2[i], np.uint64(0), k0, k1)
            sel = idx & np.uint64(3)
            if sel == np.uint64(0):
                w = w0
            elif sel == np.uint64(1):
                w = w1
            elif sel == np.uint64(2):
                w = w2
            else:
                w = w3
            out[i, j] = w


@njit(cache=True)
def _philox_one(c0, c1, c2, c3, k0, k1, out):
    out[0], out[1], out[2], out[3] = _philox_block(c0, c1, c2, c3, k0, k1)


def philox_words(counter, key):
    """One Philox4x64-10 block: 4-word counter, 2-word key -> 4 output words.

    Exposed for the bit-compatibility test against numpy's Philox.
    """
    c = np.asarray(counter, dtype=np.uint64)
    k = np.asarray(key, dtype=np.uint64)
    out = np.empty(4, dtype=np.uint64)
    _philox_one(c[0], c[1], c[2], c[3], k[0], k[1], out)
    return out


def derive_key(seed: int) -> tuple[np.uint64, np.uint64]:
    """Map a user seed to the 128-bit Philox key (splitmix finalizer for word 2)."""
    s = seed & _MASK64
    z = (s + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return np.uint64(s), np.uint64(z)


def pack_stream(level: int, role: int, split: int = 0) -> np.uint64:
    """Pack the stream descriptor into one counter word."""
    if not 0 <= role < (1 << _ROLE_BITS):
        raise ValueError(f"role out of range: {role}")
    if not 0 <= split < (1 << _SPLIT_BITS):
        raise ValueError(f"split index out of range: {split}")
    if not 0 <= level < (1 << 30):
        raise ValueError(f"level out of range: {level}")
    return np.uint64((level << (_SPLIT_BITS + _ROLE_BITS)) | (role << _SPLIT_BITS) | split)


def _words_to_normals(words: np.ndarray) -> np.ndarray:
    # top 53 bits -> uniform strictly inside (0, 1), then inverse normal CDF
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
    return ndtri(u)


def fill_normals(k0, k1, c1, c2, starts, count: int) -> np.ndarray:
    """Standard normals for many streams at once.

    c1, c2, starts are per-lane uint64 arrays; returns shape (lanes, count).
    """
    n_lanes = c1.shape[0]
    out = np.empty((n_lanes, count), dtype=np.uint64)
    if count > 0 and n_lanes > 0:
        _fill_words(np.uint64(k0), np.uint64(k1), c1, c2, starts, count, out)
    return _words_to_normals(out)


@dataclass(frozen=True)
class StreamKey:
    """Logical address of a noise stream (plus a word offset within it)."""

    seed: int
    level: int = 0
    sample: int = 0
    role: int = ROLE_JOINT
    split: int = 0
    counter: int = 0


def normals(key: StreamKey, count: int) -> np.ndarray:
    """Standard normal variates ``count`` words into the stream at ``key``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    k0, k1 = derive_key(key.seed)
    c1 = np.array([key.sample], dtype=np.uint64)
    c2 = np.array([pack_stream(key.level, key.role, key.split)], dtype=np.uint64)
    starts = np.array([key.counter], dtype=np.uint64)
    return fill_normals(k0, k1, c1, c2, starts, count)[0]


class NoiseStream:
    """Stateful cursor over one keyed stream; hands out normals in order."""

    def __init__(self, key: StreamKey):
        self.key = key
        self._k0, self._k1 = derive_key(key.seed)
        self._c1 = np.array([key.sample], dtype=np.uint64)
        self._c2 = np.array([pack_stream(key.level, key.role, key.split)], dtype=np.uint64)
        self.cursor = key.counter

    def normals(self, count: int) -> np.ndarray:
        starts = np.array([self.cursor], dtype=np.uint64)
        z = fill_normals(self._k0, self._k1, self._c1, self._c2, starts, count)[0]
        self.cursor += count
        return z


class NoiseBundle:
    """Per-sample noise source: one joint stream plus indexed split substreams."""

    def __init__(self, seed: int, level: int, sample: int):
        self.seed = seed
        self.level = level
        self.sample = sample

    def joint(self) -> NoiseStream:
        return NoiseStream(StreamKey(self.seed, self.level, self.sample, ROLE_JOINT))

    def fine_split(self, m: int) -> NoiseStream:
        return NoiseStream(StreamKey(self.seed, self.level, self.sample, ROLE_FINE_SPLIT, m))

    def coarse_split(self, m: int) -> NoiseStream:
        return NoiseStream(StreamKey(self.seed, self.level, self.sample, ROLE_COARSE_SPLIT, m))


def set_threads(n: int) -> int:
    """Set the kernel thread count, clamped to what this host allows.

    Lane outputs do not depend on the thread count, so this only affects speed.
    """
    limit = numba.config.NUMBA_NUM_THREADS
    n_eff = max(1, min(int(n), limit))
    numba.set_num_threads(n_eff)
    return n_eff
