import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from kindep.errors import (
    BiasBoundViolated,
    ConfigError,
    DenominatorMismatch,
    DomainError,
    EnumerationTooLarge,
    NoPrimeInInterval,
)
from kindep.field import (
    MERSENNE61,
    FieldPrime,
    PolyDraw,
    PolyHashFamily,
    RangeMap,
    UnitValue,
    all_coefficient_vectors,
    draw_poly,
    eval_poly,
    find_prime_in,
    is_prime,
    nb_draw_coeffs,
    nb_mulhi64,
    nb_mulmod,
    nb_mulmod61,
    nb_poly_eval,
    nb_scale,
    to_range,
    to_unit,
    verify_exact_independence,
)

P = MERSENNE61
residue = st.integers(0, P - 1)


@given(st.integers(0, 10**6))
def test_is_prime_agrees_with_sympy(n):
    assert is_prime(n) == sympy.isprime(n)


@given(st.integers(10**12, 10**20))
@settings(max_examples=300)
def test_is_prime_large_agrees_with_sympy(n):
    assert is_prime(n) == sympy.isprime(n)


def test_known_primes_and_carmichael():
    assert is_prime(MERSENNE61)
    assert not is_prime(561) and not is_prime(3215031751)
    with pytest.raises(ConfigError):
        FieldPrime(15)


@pytest.mark.parametrize("lo,hi,want", [(10, 20, 19), (2, 2, 2), (16, 32, 31), (4, 8, 7)])
def test_find_prime_in(lo, hi, want):
    assert find_prime_in(lo, hi).p == want


def test_find_prime_in_errors():
    with pytest.raises(NoPrimeInInterval):
        find_prime_in(24, 25)
    with pytest.raises(ConfigError):
        find_prime_in(1, 5)
    with pytest.raises(ConfigError):
        find_prime_in(9, 5)


@given(residue, residue)
def test_mulmod61_against_python(a, b):
    assert int(nb_mulmod61(np.uint64(a), np.uint64(b))) == a * b % P


@given(st.integers(0, 65520), st.integers(0, 65520))
def test_mulmod_small_prime(a, b):
    p = 65521
    assert int(nb_mulmod(np.uint64(a), np.uint64(b), np.uint64(p))) == a * b % p


@given(residue, st.integers(1, (1 << 32) - 1))
def test_scale_is_exact_floor(e, r):
    assert int(nb_scale(np.uint64(e), np.uint64(r), np.uint64(P))) == e * r // P


@given(st.integers(0, (1 << 64) - 1), st.integers(0, (1 << 64) - 1))
def test_mulhi64(a, b):
    assert int(nb_mulhi64(np.uint64(a), np.uint64(b))) == (a * b) >> 64


@given(st.integers(0, (1 << 64) - 1), st.integers(1, 6), st.sampled_from([5, 65521, P]))
def test_compiled_draw_and_eval_match_python(seed, k, p):
    fam = PolyHashFamily(p, min(k, p))
    d = draw_poly(fam, seed)
    coeffs = nb_draw_coeffs(np.uint64(seed), fam.k, np.uint64(p))
    assert tuple(int(c) for c in coeffs) == d.coeffs
    for x in (0, 1, 2, p - 1):
        assert int(nb_poly_eval(coeffs, np.uint64(x), np.uint64(p))) == eval_poly(d, x)


def test_eval_poly_examples():
    assert eval_poly(PolyDraw(PolyHashFamily(5, 2), (2, 3)), 4) == 1
    assert eval_poly(PolyDraw(PolyHashFamily(7, 3), (1, 0, 0)), 3) == 2
    const = PolyDraw(PolyHashFamily(7, 3), (0, 0, 4))
    assert const.is_constant() and {eval_poly(const, x) for x in range(7)} == {4}
    with pytest.raises(DomainError):
        eval_poly(const, 7)


def test_draw_poly_deterministic_and_in_domain():
    fam = PolyHashFamily(5, 2)
    assert draw_poly(fam, 42) == draw_poly(fam, 42)
    assert draw_poly(PolyHashFamily(2, 1), 9).coeffs[0] in (0, 1)


def test_draw_poly_constant_term_uniform():
    fam = PolyHashFamily(5, 1)
    trials = 200_000
    keys = np.arange(trials, dtype=np.uint64)
    vals = [int(nb_draw_coeffs(k, 1, np.uint64(5))[0]) for k in keys[:trials]]
    counts = np.bincount(vals, minlength=5)
    sigma = np.sqrt(trials * 0.2 * 0.8)
    assert np.all(np.abs(counts - trials / 5) < 3 * sigma)
    assert draw_poly(fam, 3).coeffs[0] == vals[3]


def test_family_validation():
    with pytest.raises(ConfigError):
        PolyHashFamily(5, 0)
    with pytest.raises(ConfigError):
        PolyHashFamily(3, 4)
    with pytest.raises(ConfigError):
        PolyDraw(PolyHashFamily(5, 2), (1,))
    with pytest.raises(ConfigError):
        PolyDraw(PolyHashFamily(5, 2), (1, 5))


def test_unit_values_order_and_grids():
    fam = PolyHashFamily(11, 2)
    d = PolyDraw(fam, (3, 1))
    for x, y in itertools.combinations(range(11), 2):
        assert (to_unit(d, x) < to_unit(d, y)) == (eval_poly(d, x) < eval_poly(d, y))
    assert UnitValue(1, 4) < UnitValue(3, 4)
    assert float(UnitValue(1, 4)) == 0.25 and UnitValue(1, 4).as_fraction() == Fraction(1, 4)
    with pytest.raises(DenominatorMismatch):
        UnitValue(1, 4) < UnitValue(1, 5)
    with pytest.raises(ConfigError):
        UnitValue(4, 4)
    assert Fraction(1, P) < Fraction(1, 2**60)


def test_range_map_modes():
    d = PolyDraw(PolyHashFamily(P, 1), (P - 1,))
    assert to_range(d, 0, RangeMap(2**20)) == 2**20 - 1
    assert to_range(PolyDraw(PolyHashFamily(P, 1), (0,)), 5, RangeMap(2**20)) == 0
    small = PolyDraw(PolyHashFamily(7, 2), (3, 2))
    assert [to_range(small, x, RangeMap(7, "exact-small")) for x in range(7)] == [
        eval_poly(small, x) for x in range(7)
    ]
    with pytest.raises(BiasBoundViolated):
        to_range(small, 1, RangeMap(3))
    with pytest.raises(ConfigError):
        to_range(small, 1, RangeMap(5, "exact-small"))


@pytest.mark.parametrize("p,r", [(13, 4), (31, 7), (101, 10)])
def test_scaled_map_preimage_bias(p, r):
    counts = np.bincount([e * r // p for e in range(p)], minlength=r)
    assert np.all(np.abs(counts / p - 1 / r) <= 1 / p)


@pytest.mark.parametrize("p,k", [(3, 1), (3, 2), (5, 2), (5, 3), (7, 2)])
def test_exact_independence_all_probe_sets(p, k):
    fam = PolyHashFamily(p, k)
    for pts in itertools.combinations(range(p), k):
        assert verify_exact_independence(fam, pts) == 0


def test_exact_independence_guards():
    fam = PolyHashFamily(5, 2)
    with pytest.raises(ConfigError):
        verify_exact_independence(fam, [1, 1])
    with pytest.raises(ConfigError):
        verify_exact_independence(fam, [1])
    with pytest.raises(DomainError):
        verify_exact_independence(fam, [0, 5])
    with pytest.raises(EnumerationTooLarge):
        verify_exact_independence(PolyHashFamily(101, 5), [0, 1, 2, 3, 4])


def test_dependence_is_detected_by_the_same_counting():
    # k points with k-1 coefficients cannot be uniform on [p]^k: the helper
    # counts value tuples the same way and must see the gap
    p = 5
    fam = PolyHashFamily(p, 2)
    tuples = {}
    for a1, a0 in all_coefficient_vectors(fam):
        v = tuple((a1 * x + a0) % p for x in (0, 1, 2))
        tuples[v] = tuples.get(v, 0) + 1
    assert len(tuples) == p**2 < p**3
