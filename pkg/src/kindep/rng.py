"""Counter-based random streams.

A stream is identified by a 64-bit key; its i-th word is a pure function of
``(key, i)`` (SplitMix64 output mixing applied to ``key + (i + 1) * gamma``).
There is no mutable generator state to share between threads, so a trial's
randomness depends only on ``(master seed, experiment id, trial index)``.

Each routine exists twice: a plain-Python version working on ``int`` and a
numba version (prefix ``nb_``) working on ``np.uint64``.  Tests pin the two
against each other.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_DOMAIN = 0xD1B54A32D192ED03

# substream tags; keep in sync with users in other modules
TAG_COEFFS = 1
TAG_FULL_RANDOM = 2
TAG_INPUT = 3
TAG_REDRAW = 4
TAG_OFFSETS = 5
TAG_BLOCKS = 6


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def word(key: int, counter: int) -> int:
    """The ``counter``-th 64-bit word of stream ``key``."""
    return mix64(key + (counter + 1) * GAMMA)


def derive(key: int, tag: int) -> int:
    """Key of the child stream ``tag`` of stream ``key``."""
    return mix64(mix64(key) ^ ((tag * GAMMA + _DOMAIN) & MASK64))


def experiment_key(master_seed: int, experiment_id: str) -> int:
    digest = hashlib.blake2b(experiment_id.encode("utf-8"), digest_size=8).digest()
    return derive(mix64(master_seed & MASK64), int.from_bytes(digest, "little"))


def trial_key(exp_key: int, trial: int) -> int:
    return derive(exp_key, trial)


def trial_keys(exp_key: int, start: int, count: int) -> np.ndarray:
    return nb_trial_keys(np.uint64(exp_key), np.uint64(start), count)


class Stream:
    """Sequential reader over a counter-based stream.

    The cursor is private to the reader; two readers on the same key see the
    same words.
    """

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    def next64(self) -> int:
        w = word(self.key, self.counter)
        self.counter += 1
        return w

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` for ``1 <= n < 2**64`` (rejection, unbiased)."""
        rem = (1 << 64) % n
        limit = (1 << 64) - rem
        while True:
            w = self.next64()
            if w < limit:
                return w % n

    def bernoulli53(self, threshold: int) -> bool:
        """True with probability ``threshold / 2**53``."""
        return (self.next64() >> 11) < threshold


# --- numba twins -----------------------------------------------------------

_G = np.uint64(GAMMA)
_M1 = np.uint64(_MIX1)
_M2 = np.uint64(_MIX2)
_D = np.uint64(_DOMAIN)
_U0 = np.uint64(0)
_U1 = np.uint64(1)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)


@njit(cache=True, nogil=True)
def nb_mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def nb_word(key, counter):
    return nb_mix64(key + (counter + _U1) * _G)


@njit(cache=True, nogil=True)
def nb_derive(key, tag):
    return nb_mix64(nb_mix64(key) ^ (tag * _G + _D))


@njit(cache=True, nogil=True)
def nb_below(key, counter, n):
    """Returns ``(value, next_counter)``; same rejection rule as :meth:`Stream.below`."""
    rem = (_U0 - n) % n  # 2**64 mod n
    while True:
        w = nb_word(key, counter)
        counter += _U1
        if rem == _U0 or w < _U0 - rem:
            return w % n, counter


@njit(cache=True, nogil=True)
def nb_bernoulli53(key, counter, threshold):
    w = nb_word(key, counter)
    return (w >> _S11) < threshold, counter + _U1


@njit(cache=True, nogil=True)
def nb_trial_keys(exp_key, start, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = nb_derive(exp_key, start + np.uint64(i))
    return out


@njit(cache=True, nogil=True)
def nb_shuffle(arr, key, counter):
    """In-place Fisher-Yates driven by stream ``key``; returns the next counter."""
    n = arr.shape[0]
    for i in range(n - 1, 0, -1):
        j, counter = nb_below(key, counter, np.uint64(i + 1))
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp
    return counter


def shuffle(arr: list, key: int, counter: int = 0) -> int:
    """Plain-Python Fisher-Yates matching :func:`nb_shuffle`."""
    s = Stream(key, counter)
    for i in range(len(arr) - 1, 0, -1):
        j = s.below(i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    return s.counter
