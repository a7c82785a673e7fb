"""Hash family handles consumed by the experiments.

A handle is an immutable description of a distribution over hash functions.
Per trial, the function is fixed by the trial's stream key, so
``family.unit_values(key, xs)`` and ``family.range_values(key, xs, r)`` are
pure functions of their arguments.

The two "plain" families share compiled evaluation code, selected by an
integer code:

* ``FULL_RANDOM`` - the full-random oracle.  ``h(x)`` is the ``x``-th word of
  a per-trial stream; unit values live on the grid ``2**-61`` and ranges are
  taken with a 64-bit multiply-high (bias at most ``r / 2**64``).
* ``POLY`` - degree ``k - 1`` polynomial over ``GF(p)``.

The adversarial constructions live in :mod:`kindep.adversarial`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError
from .field import (
    BIAS_SHIFT,
    MERSENNE61,
    PolyHashFamily,
    RangeMap,
    draw_poly,
    kernel_prime,
    nb_draw_coeffs,
    nb_mulhi64,
    nb_poly_eval,
    nb_scale,
)

FULL_RANDOM = 0
POLY = 1

FULL_RANDOM_DENOMINATOR = 1 << 61

_U0 = np.uint64(0)
_S3 = np.uint64(3)


@dataclass(frozen=True)
class FullRandom:
    name = "full-random"
    code = FULL_RANDOM

    @property
    def unit_denominator(self) -> int:
        return FULL_RANDOM_DENOMINATOR

    def kernel_args(self):
        return np.int64(FULL_RANDOM), 1, np.uint64(MERSENNE61)

    def check_range(self, r: int) -> None:
        if not 1 <= r < 1 << 32:
            raise ConfigError(f"range {r} outside [1, 2^32)")

    def unit_values(self, key: int, xs) -> np.ndarray:
        return nb_unit_values(*self.kernel_args(), np.uint64(key), _keys(xs))

    def range_values(self, key: int, xs, r: int) -> np.ndarray:
        self.check_range(r)
        return nb_range_values(*self.kernel_args(), np.uint64(key), _keys(xs), np.uint64(r))

    def describe(self) -> str:
        return "full-random"


@dataclass(frozen=True)
class Polynomial:
    k: int
    prime: int = MERSENNE61

    name = "poly"
    code = POLY

    def __post_init__(self):
        PolyHashFamily(self.prime, self.k)  # validates
        kernel_prime(self.prime)

    @property
    def family(self) -> PolyHashFamily:
        return PolyHashFamily(self.prime, self.k)

    @property
    def unit_denominator(self) -> int:
        return self.prime

    def kernel_args(self):
        return np.int64(POLY), self.k, np.uint64(self.prime)

    def range_map(self, r: int) -> RangeMap:
        rmap = RangeMap(r, "exact-small" if r == self.prime else "scaled")
        rmap.check(self.prime)
        if r >= 1 << 32:
            raise ConfigError(f"range {r} too large for compiled kernels")
        return rmap

    def check_range(self, r: int) -> None:
        self.range_map(r)

    def draw(self, key: int):
        return draw_poly(self.family, key)

    def unit_values(self, key: int, xs) -> np.ndarray:
        xs = _keys(xs)
        if xs.size and int(xs.max()) >= self.prime:
            raise ConfigError(f"keys must lie in [0, {self.prime})")
        return nb_unit_values(*self.kernel_args(), np.uint64(key), xs)

    def range_values(self, key: int, xs, r: int) -> np.ndarray:
        self.check_range(r)
        xs = _keys(xs)
        if xs.size and int(xs.max()) >= self.prime:
            raise ConfigError(f"keys must lie in [0, {self.prime})")
        return nb_range_values(*self.kernel_args(), np.uint64(key), xs, np.uint64(r))

    def describe(self) -> str:
        return f"poly(k={self.k}, p={self.prime})"


def max_scaled_range() -> int:
    return MERSENNE61 >> BIAS_SHIFT


def _keys(xs) -> np.ndarray:
    arr = np.asarray(xs)
    if arr.size and arr.min() < 0:
        raise ConfigError("keys must be non-negative")
    return np.ascontiguousarray(arr, dtype=np.uint64)


# --- compiled evaluation ---------------------------------------------------


@njit(cache=True, nogil=True)
def nb_prepare(code, k, p, trial_key):
    """Per-trial state: polynomial coefficients, or the full-random stream key."""
    if code == POLY:
        return nb_draw_coeffs(trial_key, k, p), _U0
    return np.empty(0, dtype=np.uint64), rng.nb_derive(trial_key, np.uint64(rng.TAG_FULL_RANDOM))


@njit(cache=True, nogil=True)
def nb_unit(code, coeffs, fr_key, p, x):
    """Numerator of ``h(x)``; denominator ``p`` (POLY) or ``2**61`` (FULL_RANDOM)."""
    if code == POLY:
        return nb_poly_eval(coeffs, x, p)
    return rng.nb_word(fr_key, x) >> _S3


@njit(cache=True, nogil=True)
def nb_range(code, coeffs, fr_key, p, x, r):
    if code == POLY:
        e = nb_poly_eval(coeffs, x, p)
        if r == p:
            return e
        return nb_scale(e, r, p)
    return nb_mulhi64(rng.nb_word(fr_key, x), r)


@njit(cache=True, nogil=True)
def nb_unit_values(code, k, p, trial_key, xs):
    coeffs, fr_key = nb_prepare(code, k, p, trial_key)
    out = np.empty(xs.shape[0], dtype=np.uint64)
    for i in range(xs.shape[0]):
        out[i] = nb_unit(code, coeffs, fr_key, p, xs[i])
    return out


@njit(cache=True, nogil=True)
def nb_range_values(code, k, p, trial_key, xs, r):
    coeffs, fr_key = nb_prepare(code, k, p, trial_key)
    out = np.empty(xs.shape[0], dtype=np.int64)
    for i in range(xs.shape[0]):
        out[i] = np.int64(nb_range(code, coeffs, fr_key, p, xs[i], r))
    return out


def parse_family(name: str, k: int | None = None, prime: int | None = None):
    """Plain families by CLI name; adversarial ones are built by their modules."""
    if name == "full-random":
        return FullRandom()
    if name == "poly":
        if k is None:
            raise ConfigError("--k is required for the poly family")
        return Polynomial(k, prime or MERSENNE61)
    raise ConfigError(f"unknown family {name!r}")
