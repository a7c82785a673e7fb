"""Explicit "bad" hash distributions under limited independence.

Two constructions:

* A 2-independent hash on keys ``x_0..x_n`` for which ``x_0`` is the strict
  minimum with probability ``Omega(1/sqrt(n))``.  It mixes four assignment
  strategies S1..S4 for a coarse value ``g(x)`` in ``[l+1]``, ``l = 10 sqrt(n)``,
  and sets ``h(x) = (g(x) + U_x) / (l+1)`` with i.i.d. offsets ``U_x``.
* A k-independent way of throwing ``n`` balls into ``n`` buckets whose largest
  bucket is ``Omega(m)`` with probability ``Omega(n / m^k)``: buckets are cut
  into blocks of prime size ``p``, and the first ``p`` balls landing in a block
  are spread by a random polynomial over ``GF(p)``.

Plus the rotation ``h'(x) = (h(x) - z) mod 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numba import njit

from . import rng
from .errors import ConfigError, DenominatorMismatch, ExperimentError, HypothesisViolated, NoPrimeInInterval, UnsupportedN
from .field import (
    MERSENNE61,
    FieldPrime,
    PolyDraw,
    PolyHashFamily,
    UnitValue,
    find_prime_in,
    nb_poly_eval,
)

S1, S2, S3, S4 = 1, 2, 3, 4
STRATEGY_NAMES = {S1: "S1", S2: "S2", S3: "S3", S4: "S4"}

_P61 = np.uint64(MERSENNE61)


def _threshold53(prob: Fraction) -> int:
    return math.floor(prob * (1 << 53))


# --- min-wise mixture ------------------------------------------------------


@dataclass(frozen=True)
class MinwiseMixParams:
    n: int
    s: int
    ell: int
    p1: Fraction
    p2: Fraction
    q: Fraction
    c1: Fraction  # pair collision among non-x0 keys under S1
    c3: Fraction  # same under S3, exact for the implemented assignment

    @property
    def keys(self) -> int:
        return self.n + 1

    @property
    def z_size(self) -> int:
        return 2 * self.s

    @property
    def block(self) -> int:
        """Keys per coarse value under S1 (``n / l``)."""
        return self.s

    def strategy_probabilities(self) -> dict:
        q, p1, p2 = self.q, self.p1, self.p2
        return {S1: q * p1, S2: q * (1 - p1), S3: (1 - q) * p2, S4: (1 - q) * (1 - p2)}

    def pair_collision(self) -> Fraction:
        """Pr(g(x) = g(x')) for distinct non-x0 keys under the mixture."""
        q, p1, p2 = self.q, self.p1, self.p2
        return q * (p1 * self.c1 + (1 - p1)) + (1 - q) * (p2 * self.c3 + (1 - p2))

    def x0_collision(self) -> Fraction:
        """Pr(g(x) = g(x_0)) for a non-x0 key under the mixture."""
        return (1 - self.q) * (self.p2 * Fraction(1, 50 * self.s) + (1 - self.p2))

    def thresholds(self):
        return _threshold53(self.q), _threshold53(self.p1), _threshold53(self.p2)


def s3_collision_bound(n: int) -> Fraction:
    """Closed-form upper bound on the S3 pair-collision probability."""
    s = _s_of(n)
    ell = 100 * s
    z = 2 * s
    return Fraction(n // ell - 1, n - 1) + Fraction(z * (z - 1), n * (n - 1))


def _s_of(n: int) -> int:
    if n < 100 or n % 100:
        raise UnsupportedN(f"n must be 100*s^2, got {n}")
    s = math.isqrt(n // 100)
    if 100 * s * s != n:
        raise UnsupportedN(f"n must be 100*s^2, got {n}")
    return s


def derive_mix_params(n: int) -> MinwiseMixParams:
    """Mixing probabilities that make every pair of keys collide w.p. ``1/(l+1)``."""
    s = _s_of(n)
    ell = 100 * s
    target = Fraction(1, ell + 1)
    z = 2 * s
    c1 = Fraction(s - 1, n - 1)
    # S3 leaves exactly two coarse values unused: (l - 2) values carry s keys each
    c3 = Fraction(z * (z - 1) + (ell - 2) * s * (s - 1), n * (n - 1))
    p1 = (1 - target) / (1 - c1)
    p2 = (1 - target) / (1 - c3)
    t2_x0 = p2 * Fraction(1, 50 * s) + (1 - p2)
    q = 1 - target / t2_x0
    lo = 1 - target
    if not (lo <= p1 < 1 and lo < p2 < 1 and q >= Fraction(1, 2)):
        raise ExperimentError(f"mixing probabilities out of range for n={n}")
    return MinwiseMixParams(n=n, s=s, ell=ell, p1=p1, p2=p2, q=q, c1=c1, c3=c3)


@dataclass(frozen=True)
class StrategyMixDraw:
    params: MinwiseMixParams
    strategy: int
    g: np.ndarray
    offsets: np.ndarray  # numerators over 2**61 - 1

    @property
    def strategy_name(self) -> str:
        return STRATEGY_NAMES[self.strategy]


@njit(cache=True, nogil=True)
def nb_mixture_draw(n, s, ell, q_thr, p1_thr, p2_thr, key, g, u):
    """Fill ``g`` (coarse values) and ``u`` (offsets) for keys ``0..n``; return strategy id."""
    ctr = np.uint64(0)
    go_t1, ctr = rng.nb_bernoulli53(key, ctr, np.uint64(q_thr))
    if go_t1:
        pick_first, ctr = rng.nb_bernoulli53(key, ctr, np.uint64(p1_thr))
        strategy = 1 if pick_first else 2
    else:
        pick_first, ctr = rng.nb_bernoulli53(key, ctr, np.uint64(p2_thr))
        strategy = 3 if pick_first else 4

    gu, ctr = rng.nb_below(key, ctr, np.uint64(ell + 1))
    g0 = np.int64(gu)
    if strategy == 4:
        for x in range(n + 1):
            g[x] = g0
    elif strategy == 2:
        y, ctr = rng.nb_below(key, ctr, np.uint64(ell))
        y1 = np.int64(y)
        if y1 >= g0:
            y1 += 1
        g[0] = g0
        for x in range(1, n + 1):
            g[x] = y1
    else:
        g[0] = g0
        perm = np.arange(1, n + 1)
        ctr = rng.nb_shuffle(perm, key, ctr)
        vals = np.empty(ell, dtype=np.int64)
        j = 0
        for y in range(ell + 1):
            if y != g0:
                vals[j] = y
                j += 1
        if strategy == 1:
            for j in range(n):
                g[perm[j]] = vals[j // s]
        else:
            ctr = rng.nb_shuffle(vals, key, ctr)
            z = 2 * s
            for j in range(z):
                g[perm[j]] = g0
            for j in range(z, n):
                g[perm[j]] = vals[(j - z) // s]

    okey = rng.nb_derive(key, np.uint64(rng.TAG_OFFSETS))
    octr = np.uint64(0)
    for x in range(n + 1):
        u[x], octr = rng.nb_below(okey, octr, _P61)
    return strategy


def draw_minwise_adversary(params: MinwiseMixParams, seed: int) -> StrategyMixDraw:
    g = np.empty(params.n + 1, dtype=np.int64)
    u = np.empty(params.n + 1, dtype=np.uint64)
    q_thr, p1_thr, p2_thr = params.thresholds()
    strategy = nb_mixture_draw(params.n, params.s, params.ell, q_thr, p1_thr, p2_thr, np.uint64(seed), g, u)
    return StrategyMixDraw(params, int(strategy), g, u)


def hash_of(draw: StrategyMixDraw, key_index: int) -> UnitValue:
    """``(g(x) + U_x) / (l + 1)`` as an exact grid value."""
    n = draw.params.n
    if not 0 <= key_index <= n:
        raise ConfigError(f"key index {key_index} outside [0, {n}]")
    num = int(draw.g[key_index]) * MERSENNE61 + int(draw.offsets[key_index])
    return UnitValue(num, (draw.params.ell + 1) * MERSENNE61)


def rotate(h_values: Sequence[UnitValue], z: UnitValue) -> list:
    """``(h(x) - z) mod 1`` elementwise."""
    den = z.denominator
    out = []
    for h in h_values:
        if h.denominator != den:
            raise DenominatorMismatch(f"{h.denominator} != {den}")
        out.append(UnitValue((h.numerator - z.numerator) % den, den))
    return out


# --- largest-bucket adversary ----------------------------------------------


@dataclass(frozen=True)
class BucketAdversaryParams:
    n: int
    m: int
    k: int
    p: FieldPrime
    t: int

    @property
    def prime(self) -> int:
        return self.p.p

    def block_range(self, j: int) -> range:
        lo = j * self.prime
        return range(lo, min(lo + self.prime, self.n))

    def block_sizes(self) -> list:
        return [self.prime] * self.t + [self.n - self.prime * self.t]

    def ratio(self) -> float:
        """``n / m^k``, the probability scale of a large bucket."""
        return self.n / self.m**self.k


def derive_bucket_params(n: int, m: int, k: int) -> BucketAdversaryParams:
    if k < 1 or m < 1 or n < 1:
        raise ConfigError("n, m, k must be positive")
    if m > n:
        raise ConfigError(f"need m <= n, got m={m}, n={n}")
    if not k**k < n:
        raise HypothesisViolated(f"k < n^(1/k) fails: k={k}, n={n}")
    if not m**k >= n:
        raise HypothesisViolated(f"m^k >= n fails: m^k={m**k}, n={n}")
    lo, hi = max(2, -(-m // 4)), m // 2
    if lo > hi:
        raise NoPrimeInInterval(f"no prime in [{m / 4}, {m / 2}]")
    p = find_prime_in(lo, hi)
    if p.p < k:
        raise HypothesisViolated(f"prime p={p.p} is smaller than k={k}")
    return BucketAdversaryParams(n=n, m=m, k=k, p=p, t=n // p.p)


@dataclass(frozen=True)
class BucketAdversaryDraw:
    params: BucketAdversaryParams
    block_of_ball: np.ndarray
    block_polys: tuple
    overflow_values: dict = field(default_factory=dict)


@njit(cache=True, nogil=True)
def nb_bucket_draw(n, p, t, k, key):
    """Raw draw: coefficients (t x k), block per ball, value per overflow ball (-1 elsewhere)."""
    up = np.uint64(p)
    ckey = rng.nb_derive(key, np.uint64(rng.TAG_COEFFS))
    coeffs = np.empty((t, k), dtype=np.uint64)
    ctr = np.uint64(0)
    for j in range(t):
        for i in range(k):
            coeffs[j, i], ctr = rng.nb_below(ckey, ctr, up)

    bkey = rng.nb_derive(key, np.uint64(rng.TAG_BLOCKS))
    okey = rng.nb_derive(key, np.uint64(rng.TAG_OFFSETS))
    bctr = np.uint64(0)
    octr = np.uint64(0)
    blocks = np.empty(n, dtype=np.int64)
    overflow = np.full(n, -1, dtype=np.int64)
    fill = np.zeros(t + 1, dtype=np.int64)
    tail = n - p * t
    for i in range(n):
        r, bctr = rng.nb_below(bkey, bctr, np.uint64(n))
        j = min(np.int64(r) // p, t)
        blocks[i] = j
        if j < t:
            if fill[j] >= p:
                v, octr = rng.nb_below(okey, octr, up)
                overflow[i] = j * p + np.int64(v)
        else:
            v, octr = rng.nb_below(okey, octr, np.uint64(tail))
            overflow[i] = t * p + np.int64(v)
        fill[j] += 1
    return coeffs, blocks, overflow


@njit(cache=True, nogil=True)
def nb_bucket_positions(n, p, t, k, key):
    coeffs, blocks, overflow = nb_bucket_draw(n, p, t, k, key)
    up = np.uint64(p)
    pos = np.empty(n, dtype=np.int64)
    rank = np.zeros(t + 1, dtype=np.int64)
    for i in range(n):
        j = blocks[i]
        if overflow[i] >= 0:
            pos[i] = overflow[i]
        else:
            pos[i] = j * p + np.int64(nb_poly_eval(coeffs[j], np.uint64(rank[j]), up))
        rank[j] += 1
    return pos


def draw_bucket_adversary(params: BucketAdversaryParams, seed: int) -> BucketAdversaryDraw:
    coeffs, blocks, overflow = nb_bucket_draw(params.n, params.prime, params.t, params.k, np.uint64(seed))
    fam = PolyHashFamily(params.p, params.k)
    polys = tuple(PolyDraw(fam, tuple(int(c) for c in row)) for row in coeffs)
    over = {int(i): int(overflow[i]) for i in np.flatnonzero(overflow >= 0)}
    return BucketAdversaryDraw(params, blocks, polys, over)


def ball_positions(draw: BucketAdversaryDraw) -> np.ndarray:
    """Bucket of every ball; the first ``p`` balls of block ``j`` go to ``s_{h_j(rank)}``."""
    prm = draw.params
    p = prm.prime
    pos = np.empty(prm.n, dtype=np.int64)
    seen = [0] * (prm.t + 1)
    for i, j in enumerate(draw.block_of_ball.tolist()):
        if i in draw.overflow_values:
            pos[i] = draw.overflow_values[i]
        else:
            pos[i] = j * p + draw.block_polys[j](seen[j])
        seen[j] += 1
    return pos
