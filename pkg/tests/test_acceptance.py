"""Acceptance criteria C1..C12, each at its stated tolerance.

Every check prints one ``C<n> PASS|FAIL`` line; the full list is repeated in
the terminal summary.  "Within CI" means within three standard errors.
"""

import io
import itertools
import math
import time

import numpy as np
import pytest
from conftest import exact_mixture_win

from kindep.adversarial import derive_bucket_params, derive_mix_params, nb_bucket_positions
from kindep.buckets import (
    BucketLoads,
    adversary_exceedance,
    falling_factorial_moment,
    tail_bound_check,
    verify_moment_identity,
)
from kindep.cli import parse_args, run
from kindep.estimators import (
    Estimate,
    binomial_central_moment,
    chi_square_uniform,
    dyadic_sets,
    empirical_central_moment,
    enumerate_C_setting1,
    estimate_C_setting1,
    estimate_minwise,
    funkysum_check,
    mixture_trials,
    pair_difference_counts,
)
from kindep.families import FullRandom, Polynomial
from kindep.field import PolyHashFamily, verify_exact_independence
from kindep.quicksort import PivotSource, estimate_comparisons

SIGNIFICANCE = 1e-3


def within_3se(est, value):
    return abs(est.mean - float(value)) <= 3 * est.stderr


def test_c1_exact_independence(verdict):
    t0 = time.perf_counter()
    worst = {}
    for p, k in [(3, 2), (5, 2), (5, 3)]:
        fam = PolyHashFamily(p, k)
        worst[(p, k)] = max(verify_exact_independence(fam, pts) for pts in itertools.combinations(range(p), k))
    secs = time.perf_counter() - t0
    verdict("C1", all(w == 0 for w in worst.values()) and secs < 10,
            f"max deviation {max(worst.values())} over all probe sets, {secs:.2f}s")


@pytest.mark.parametrize("n", [100, 400])
def test_c2_minwise_full_random_baseline(verdict, n):
    est = estimate_minwise(n, 0, FullRandom(), 10**5, 20, "acceptance/c2")
    lo, hi = est.binomial_ci(0.99)
    verdict("C2", lo <= 1 / (n + 1) <= hi, f"n+1={n + 1}: {est.mean:.5f} in [{lo:.5f}, {hi:.5f}] vs {1 / (n + 1):.5f}")


def test_c3_minwise_adversary_separation(verdict):
    n, trials, seed = 10**4, 2 * 10**5, 31
    prm = derive_mix_params(n)
    probe = [0, *np.random.default_rng(3).choice(np.arange(1, n + 1), 4, replace=False).tolist()]
    rows = mixture_trials(prm, trials, seed, "acceptance/c3", probe=probe)
    mix = Estimate.from_samples(rows[:, 1], (seed, "acceptance/c3"), indicator=True)
    full = estimate_minwise(n, 0, FullRandom(), trials, seed, "acceptance/c3-full")
    floor = 0.4 / (prm.ell + 1)
    exact = exact_mixture_win(prm)
    verdict("C3", mix.mean >= 2 * full.mean and mix.mean >= floor and within_3se(mix, exact),
            f"mixture {mix.mean:.6f} (exact {float(exact):.6f}) vs full-random {full.mean:.6f} "
            f"(x{mix.mean / full.mean:.1f}), floor {floor:.6f}")
    cells = prm.ell + 1
    bins = max(d for d in range(1, 33) if cells % d == 0)
    width = cells // bins
    pvals = []
    for i, j in itertools.combinations(range(len(probe)), 2):
        gx, gy = rows[:, 3 + i], rows[:, 3 + j]
        pvals.append(chi_square_uniform(pair_difference_counts(gx, gy, cells))[1])
        pvals.append(chi_square_uniform(np.bincount(gx // width * bins + gy // width, minlength=bins * bins))[1])
    verdict("C3", min(pvals) > SIGNIFICANCE,
            f"{len(pvals) // 2} pairs (difference classes and {bins}x{bins} blocked grid), min p={min(pvals):.3g}")


def test_c4_minwise_scaling(verdict):
    ns = [100, 400, 2500, 10**4]
    scaled = {}
    for k in (5, 2):
        scaled[k] = [n * estimate_minwise(n, 0, Polynomial(k), 10**6, 40 + k, "acceptance/c4").mean for n in ns]
    band = max(scaled[5]) / min(scaled[5])
    verdict("C4", band <= 2, f"k=5 n*Pr {[round(v, 3) for v in scaled[5]]}, band x{band:.2f}")
    growth = []
    ok = True
    for (n0, a), (n1, b) in itertools.pairwise(zip(ns, scaled[2])):
        limit = 1.5 ** math.log(n1 / n0, 4)
        growth.append(round(b / a, 3))
        ok &= b / a <= limit
    verdict("C4", ok, f"k=2 n*Pr {[round(v, 3) for v in scaled[2]]}, step growth {growth}")


def test_c5_a_before_b_count_stays_constant(verdict):
    ns = [2**12, 2**14, 2**16]
    for label, level_of in [("level 5", lambda n: 5), ("level log2(n)-2", lambda n: int(math.log2(n)) - 2)]:
        means = []
        for n in ns:
            A, B = dyadic_sets(0, level_of(n), n)
            means.append(estimate_C_setting1(n, A, B, Polynomial(4), 10**4, 50, experiment_id="acceptance/c5").mean)
        verdict("C5", max(means) <= 5 and max(means) / min(means) <= 2,
                f"{label}: E(C) {[round(m, 3) for m in means]}")
    cases = [(5, 5, 2, [0], [3]), (5, 5, 3, [1, 2], [0, 4]), (4, 7, 2, [2], [5, 6]), (5, 7, 4, [0, 1], [2, 3, 4])]
    agree = []
    for n, p, k, A, B in cases:
        exact = enumerate_C_setting1(n, A, B, p, k)
        est = estimate_C_setting1(n, A, B, Polynomial(k, p), 40000, 51, range_size=p)
        agree.append(within_3se(est, exact))
    verdict("C5", all(agree), f"enumeration vs Monte Carlo at n<=5, p<=7: {sum(agree)}/{len(agree)} agree")


@pytest.mark.parametrize("setting", ["setting1", "setting2"])
def test_c6_quicksort_4_independent(verdict, setting):
    ratios = []
    for e in range(10, 17):
        n = 2**e
        est = estimate_comparisons(n, PivotSource(setting, Polynomial(4)), 200, 60, experiment_id="acceptance/c6")
        ratios.append(est.total.mean / (n * math.log2(n)))
    spread = max(ratios) / min(ratios)
    n = 2**14
    k4 = estimate_comparisons(n, PivotSource(setting, Polynomial(4)), 200, 61).total.mean
    fr = estimate_comparisons(n, PivotSource(setting, FullRandom()), 200, 61).total.mean
    rel = abs(k4 - fr) / fr
    verdict("C6", spread <= 1.3 and rel <= 0.2,
            f"{setting}: comparisons/(n log2 n) {[round(r, 3) for r in ratios]}, spread x{spread:.3f}, "
            f"vs full-random at 2^14 {rel:.1%}")


@pytest.mark.parametrize("shuffled", [False, True], ids=["identity", "shuffled"])
def test_c7_cleanup_k2(verdict, shuffled):
    src = PivotSource("setting1", Polynomial(2))
    ratios = []
    for e in range(10, 17):
        n = 2**e
        est = estimate_comparisons(n, src, 1000, 7, shuffled=shuffled, experiment_id="acceptance/c7")
        ratios.append(est.cleanup.mean / (n * math.log2(n)))
    spread = max(ratios) / min(ratios)
    order = "shuffled" if shuffled else "identity"
    verdict("C7", spread <= 2, f"{order}: cleanup/(n log2 n) {[round(r, 5) for r in ratios]}, spread x{spread:.2f}")


def _partitions(total, largest=None):
    largest = total if largest is None else largest
    if total == 0:
        yield []
        return
    for part in range(min(total, largest), 0, -1):
        for rest in _partitions(total - part, part):
            yield [part, *rest]


def _tuples_in_one_bucket(loads, k):
    owner = [b for b, c in enumerate(loads) for _ in range(c)]
    same = sum(1 for t in itertools.combinations(range(len(owner)), k) if len({owner[i] for i in t}) == 1)
    return same * math.factorial(k)


def test_c8_moment_identity(verdict):
    for n, k in [(8, 2), (64, 2), (64, 3)]:
        est = verify_moment_identity(n, k, FullRandom(), 20000, 80)
        exact = est.extras["exact"]
        verdict("C8", within_3se(est, exact), f"(n={n}, k={k}): {est.mean:.4f} vs {float(exact):.4f}")
    checked = 0
    ok = True
    for balls in range(9):
        for part in _partitions(balls):
            loads = BucketLoads(np.array(part + [0], dtype=np.int64))
            for k in range(1, 9):
                ok &= falling_factorial_moment(loads, k).value == _tuples_in_one_bucket(part, k)
                checked += 1
    verdict("C8", ok, f"tuple enumeration agrees on {checked} (load, k) cases with <= 8 balls")


def test_c9_bucket_adversary(verdict):
    small, big = derive_bucket_params(1024, 32, 2), derive_bucket_params(4096, 64, 2)
    pr_small = adversary_exceedance(small, 5000, 90, "acceptance/c9").mean
    c_hat = pr_small / (small.n / small.m**small.k)
    pr_big = adversary_exceedance(big, 5000, 91, "acceptance/c9").mean
    need = 0.5 * (big.n / big.m**big.k) * c_hat
    verdict("C9", pr_big >= need, f"Pr(max >= p/2): {pr_small:.4f} at (1024,32,2), {pr_big:.4f} at (4096,64,2), "
                                  f"need >= {need:.4f}")
    prm = derive_bucket_params(62, 62, 2)
    draws = 100_000
    pos = np.empty((draws, prm.n), dtype=np.int64)
    for s in range(draws):
        pos[s] = nb_bucket_positions(prm.n, prm.prime, prm.t, prm.k, np.uint64(s))
    pvals = [chi_square_uniform(np.bincount(pos[:, a] * prm.n + pos[:, b], minlength=prm.n**2))[1]
             for a, b in [(0, 1), (0, 61), (30, 31), (5, 40)]]
    verdict("C9", min(pvals) > SIGNIFICANCE, f"pair chi-square at n=62, p={prm.prime}: min p={min(pvals):.3g}")


def test_c10_tail_bound(verdict):
    checks = []
    for name, fam, ks in [("full-random", FullRandom(), (2, 3)), ("poly2", Polynomial(2), (2,)),
                          ("poly3", Polynomial(3), (3,))]:
        for k in ks:
            for m in (16, 32):
                tc = tail_bound_check(256, m, k, fam, 2000, 100)
                checks.append(tc.passed)
                verdict("C10", tc.passed, f"{name} k={k} m={m}: {tc.empirical:.4f} <= {tc.bound:.4g} + 3*{tc.sigma:.4f}")
    assert all(checks)


def test_c11_facts(verdict):
    for r in (1, 2, 10):
        res = funkysum_check(r)
        verdict("C11", res.passed, f"sum_(i>r) i^-4 = {res.partial + res.tail:.6g} <= r^-3 = {res.bound:.6g} (r={r})")
    exact = binomial_central_moment(16, 0.5, 4)
    for name, fam in [("full-random", FullRandom()), ("poly5", Polynomial(5))]:
        est = empirical_central_moment(16, 0.5, fam, 4, 50000, 110)
        verdict("C11", within_3se(est, exact), f"{name}: E(X-EX)^4 = {est.mean:.4f} vs {float(exact):.4f}")


@pytest.mark.parametrize("argv", [
    ["minwise", "--n", "400", "--family", "poly", "--k", "2", "--trials", "20000"],
    ["quicksort", "--n", "2048", "--family", "poly", "--k", "4", "--setting", "2", "--trials", "50"],
    ["buckets", "--n", "4096", "--family", "adv-bucket", "--m", "64", "--k", "2", "--trials", "300"],
    ["moments", "--n", "64", "--k", "3", "--trials", "5000"],
    ["scaling", "--of", "quicksort", "--n", "256", "512", "1024", "2048", "--trials", "40"],
])
def test_c12_parallel_byte_identity(verdict, argv):
    outs = []
    for par in ("1", "3"):
        buf = io.StringIO()
        run(parse_args(argv + ["--seed", "120", "--parallel", par]), buf)
        outs.append(buf.getvalue().encode())
    verdict("C12", outs[0] == outs[1] and len(outs[0]) > 0, f"{argv[0]}: {len(outs[0])} bytes identical for --parallel 1, 3")
