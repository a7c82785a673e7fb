"""Prime fields and k-wise independent polynomial hashing.

A draw from :class:`PolyHashFamily` is ``k`` coefficients, highest degree
first, defining ``x -> a[k-1] x^(k-1) + ... + a[0] mod p``.  On any ``k``
distinct points the outputs are independent and uniform on ``[p]``.

Large-range and unit-interval work uses the Mersenne prime ``2**61 - 1``;
mapping to a range ``r`` by ``floor(e * r / p)`` is biased by at most ``r/p``
in total variation, which :class:`RangeMap` caps at ``2**-40``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from . import rng
from .errors import (
    BiasBoundViolated,
    ConfigError,
    DenominatorMismatch,
    DomainError,
    EnumerationTooLarge,
    NoPrimeInInterval,
)

MERSENNE61 = (1 << 61) - 1
ENUMERATION_LIMIT = 10**8
BIAS_SHIFT = 40

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic primality for all ``n < 3.3e24`` (Miller-Rabin, fixed bases)."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldPrime:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 2 or not is_prime(self.p):
            raise ConfigError(f"{self.p!r} is not a prime")

    def __int__(self):
        return self.p


def find_prime_in(lo: int, hi: int) -> FieldPrime:
    """Largest prime in ``[lo, hi]``."""
    if not 2 <= lo <= hi:
        raise ConfigError(f"need 2 <= lo <= hi, got lo={lo}, hi={hi}")
    for c in range(hi, lo - 1, -1):
        if is_prime(c):
            return FieldPrime(c)
    raise NoPrimeInInterval(f"no prime in [{lo}, {hi}]")


@dataclass(frozen=True)
class PolyHashFamily:
    prime: FieldPrime
    k: int

    def __post_init__(self):
        if isinstance(self.prime, int):
            object.__setattr__(self, "prime", FieldPrime(self.prime))
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.k > self.prime.p:
            raise ConfigError(f"k={self.k} exceeds the field size p={self.prime.p}")

    @property
    def p(self) -> int:
        return self.prime.p


@dataclass(frozen=True)
class PolyDraw:
    family: PolyHashFamily
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) != self.family.k:
            raise ConfigError(f"expected {self.family.k} coefficients, got {len(coeffs)}")
        if any(not 0 <= c < self.family.p for c in coeffs):
            raise ConfigError("coefficients must lie in [0, p)")

    def is_constant(self) -> bool:
        return all(c == 0 for c in self.coeffs[:-1])

    def __call__(self, x: int) -> int:
        return eval_poly(self, x)


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class UnitValue:
    """The real ``numerator / denominator`` in ``[0, 1)``.

    Values on different grids are not comparable.
    """

    numerator: int
    denominator: int

    def __post_init__(self):
        if not 0 <= self.numerator < self.denominator:
            raise ConfigError(f"numerator {self.numerator} outside [0, {self.denominator})")

    def _check(self, other):
        if not isinstance(other, UnitValue):
            return NotImplemented
        if other.denominator != self.denominator:
            raise DenominatorMismatch(f"{self.denominator} != {other.denominator}")
        return True

    def __eq__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self.numerator == other.numerator

    def __lt__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self.numerator < other.numerator

    def __hash__(self):
        return hash((self.numerator, self.denominator))

    def __float__(self):
        return self.numerator / self.denominator

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)


@dataclass(frozen=True)
class RangeMap:
    range: int
    mode: str = "scaled"

    def __post_init__(self):
        if self.range < 1:
            raise ConfigError("range must be positive")
        if self.mode not in ("scaled", "exact-small"):
            raise ConfigError(f"unknown range mode {self.mode!r}")

    def check(self, p: int) -> None:
        if self.mode == "exact-small":
            if self.range != p:
                raise ConfigError(f"exact-small mode needs range == p ({self.range} != {p})")
        elif p < self.range << BIAS_SHIFT:
            raise BiasBoundViolated(
                f"scaled mode needs p >= range * 2^{BIAS_SHIFT}; p={p}, range={self.range}"
            )


def draw_poly(family: PolyHashFamily, seed: int) -> PolyDraw:
    """Coefficients i.i.d. uniform on ``[p]``, read from the stream keyed by ``seed``."""
    s = rng.Stream(rng.derive(seed, rng.TAG_COEFFS))
    return PolyDraw(family, tuple(s.below(family.p) for _ in range(family.k)))


def eval_poly(draw: PolyDraw, x: int) -> int:
    p = draw.family.p
    if not 0 <= x < p:
        raise DomainError(f"x={x} outside [0, {p})")
    acc = 0
    for c in draw.coeffs:
        acc = (acc * x + c) % p
    return acc


def to_unit(draw: PolyDraw, x: int) -> UnitValue:
    return UnitValue(eval_poly(draw, x), draw.family.p)


def scale(e: int, r: int, p: int) -> int:
    """``floor(e * r / p)``; no bias guard (see :func:`to_range`)."""
    return e * r // p


def to_range(draw: PolyDraw, x: int, rmap: RangeMap) -> int:
    p = draw.family.p
    rmap.check(p)
    e = eval_poly(draw, x)
    if rmap.mode == "exact-small":
        return e
    return scale(e, rmap.range, p)


def all_coefficient_vectors(family: PolyHashFamily) -> Iterable[tuple]:
    return itertools.product(range(family.p), repeat=family.k)


def verify_exact_independence(family: PolyHashFamily, probe_points: Sequence[int]) -> Fraction:
    """Max over value tuples of ``|Pr(h(u) = v) - p^-k|``, by enumerating every draw.

    Returns an exact rational; zero means the joint law on ``probe_points`` is
    uniform on ``[p]^k``.
    """
    p, k = family.p, family.k
    pts = [int(u) for u in probe_points]
    if len(set(pts)) != len(pts) or len(pts) != k:
        raise ConfigError(f"need {k} distinct probe points, got {probe_points!r}")
    if any(not 0 <= u < p for u in pts):
        raise DomainError("probe points must lie in [0, p)")
    total = p**k
    if total > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"p^k = {total} exceeds {ENUMERATION_LIMIT}")

    counts = np.zeros(total, dtype=np.int32)
    chunk = 1 << 20
    u = np.array(pts, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        # decode draw index into coefficients, highest degree first
        coeffs = np.empty((k, idx.size), dtype=np.int64)
        rest = idx.copy()
        for j in range(k - 1, -1, -1):
            coeffs[j] = rest % p
            rest //= p
        cell = np.zeros(idx.size, dtype=np.int64)
        for ui in u:
            acc = np.zeros(idx.size, dtype=np.int64)
            for j in range(k):
                acc = (acc * ui + coeffs[j]) % p
            cell = cell * p + acc
        cells, hits = np.unique(cell, return_counts=True)
        counts[cells] += hits.astype(np.int32)
    dev = int(np.abs(counts.astype(np.int64) - 1).max())
    return Fraction(dev, total)


# --- numba arithmetic ------------------------------------------------------

_P61 = np.uint64(MERSENNE61)
_M32 = np.uint64(0xFFFFFFFF)
_M29 = np.uint64((1 << 29) - 1)
_U0 = np.uint64(0)
_U1 = np.uint64(1)
_S3 = np.uint64(3)
_S29 = np.uint64(29)
_S32 = np.uint64(32)
_S61 = np.uint64(61)


@njit(cache=True, nogil=True)
def nb_mulmod61(a, b):
    """``a * b mod 2**61 - 1`` for reduced ``a, b`` without 128-bit integers."""
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    lolo = a_lo * b_lo
    hihi = a_hi * b_hi
    mid = a_lo * b_hi + a_hi * b_lo
    s = (hihi << _S3) + (mid >> _S29) + ((mid & _M29) << _S32) + (lolo >> _S61) + (lolo & _P61)
    r = (s & _P61) + (s >> _S61)
    if r >= _P61:
        r -= _P61
    return r


@njit(cache=True, nogil=True)
def nb_mulmod(a, b, p):
    if p == _P61:
        return nb_mulmod61(a, b)
    return (a * b) % p  # p < 2**32


@njit(cache=True, nogil=True)
def nb_poly_eval(coeffs, x, p):
    acc = _U0
    for j in range(coeffs.shape[0]):
        acc = nb_mulmod(acc, x, p) + coeffs[j]
        if acc >= p:
            acc -= p
    return acc


@njit(cache=True, nogil=True)
def nb_scale(e, r, p):
    """Exact ``floor(e * r / p)`` for ``e < p`` and ``r < 2**32``."""
    if p != _P61:
        return (e * r) // p
    a = (e >> _S32) * r
    b = (e & _M32) * r
    hi = (a >> _S29) + (b >> _S61)
    lo = ((a & _M29) << _S32) + (b & _P61)
    hi += lo >> _S61
    lo &= _P61
    if hi + lo >= _P61:
        return hi + _U1
    return hi


@njit(cache=True, nogil=True)
def nb_mulhi64(a, b):
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    lolo = a_lo * b_lo
    lohi = a_lo * b_hi
    hilo = a_hi * b_lo
    cross = (lolo >> _S32) + (lohi & _M32) + hilo
    return a_hi * b_hi + (lohi >> _S32) + (cross >> _S32)


@njit(cache=True, nogil=True)
def nb_draw_coeffs(seed_key, k, p):
    """Same coefficients as :func:`draw_poly` for the same seed."""
    key = rng.nb_derive(seed_key, np.uint64(rng.TAG_COEFFS))
    out = np.empty(k, dtype=np.uint64)
    ctr = _U0
    for j in range(k):
        out[j], ctr = rng.nb_below(key, ctr, p)
    return out


def kernel_prime(p: int) -> np.uint64:
    """Validate that ``p`` is usable by the compiled kernels."""
    if p != MERSENNE61 and p >= 1 << 32:
        raise ConfigError("compiled kernels support p = 2^61-1 or p < 2^32")
    return np.uint64(p)
