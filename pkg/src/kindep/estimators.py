"""Monte Carlo engine and the statistics used to probe the bounds.

Every trial draws its randomness from the stream keyed by
``(master seed, experiment id, trial index)``; trials are evaluated in chunks
(optionally on a thread pool, the compiled kernels release the GIL) and the
per-trial values are concatenated in trial order before any reduction.  An
:class:`Estimate` is therefore a pure function of its lineage and parameters,
whatever the worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy import special, stats

from . import rng
from .adversarial import MinwiseMixParams, nb_mixture_draw
from .errors import CellCountTooLow, ConfigError, InsufficientPoints, InvalidSets
from .families import FullRandom, Polynomial, nb_prepare, nb_range, nb_unit

NORMAL_CI_MIN_TRIALS = 1000


@dataclass(frozen=True)
class Estimate:
    trials: int
    mean: float
    variance: float
    ci95: tuple
    seed_lineage: tuple
    successes: int | None = None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.trials) if self.trials else float("nan")

    def binomial_ci(self, level: float = 0.95) -> tuple:
        if self.successes is None:
            raise ConfigError("binomial CI needs an indicator statistic")
        return clopper_pearson(self.successes, self.trials, level)

    def covers(self, value: float) -> bool:
        return self.ci95[0] <= value <= self.ci95[1]

    @classmethod
    def from_samples(cls, values, lineage, indicator: bool = False, extras: dict | None = None) -> "Estimate":
        v = np.asarray(values, dtype=np.float64)
        t = int(v.size)
        if t == 0:
            raise ConfigError("no trials")
        mean = float(v.mean())
        var = float(v.var(ddof=1)) if t > 1 else 0.0
        successes = int(np.count_nonzero(v)) if indicator else None
        if t >= NORMAL_CI_MIN_TRIALS:
            half = 1.959963984540054 * math.sqrt(var / t)
            ci = (mean - half, mean + half)
        elif indicator:
            ci = clopper_pearson(successes, t, 0.95)
        else:
            half = float(stats.t.ppf(0.975, max(t - 1, 1))) * math.sqrt(var / t) if t > 1 else 0.0
            ci = (mean - half, mean + half)
        return cls(t, mean, var, ci, tuple(lineage), successes, dict(extras or {}))


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple:
    """Exact binomial confidence interval."""
    a = 1.0 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(a / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - a / 2, successes + 1, trials - successes))
    return lo, hi


def run_trials(kernel: Callable[[np.ndarray], np.ndarray], trials: int, seed: int, experiment_id: str,
               workers: int = 1) -> np.ndarray:
    """Evaluate ``kernel`` on the keys of trials ``0..trials-1``; rows come back in trial order."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    exp_key = rng.experiment_key(seed, experiment_id)
    workers = max(1, int(workers))
    size = max(1, math.ceil(trials / (4 * workers)))
    starts = range(0, trials, size)

    def chunk(start):
        return kernel(rng.trial_keys(exp_key, start, min(size, trials - start)))

    if workers == 1:
        parts = [chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, starts))
    return np.concatenate(parts)


# --- min-wise probability --------------------------------------------------


@njit(cache=True, nogil=True)
def nb_minwise_trials(code, k, p, keys, n, target):
    """Per trial: (target is the strict minimum over keys 0..n, tie seen at the target's value)."""
    out = np.zeros((keys.shape[0], 2), dtype=np.int64)
    ut = np.uint64(target)
    for t in range(keys.shape[0]):
        coeffs, frk = nb_prepare(code, k, p, keys[t])
        ht = nb_unit(code, coeffs, frk, p, ut)
        win = 1
        tie = 0
        for x in range(n + 1):
            if x == target:
                continue
            v = nb_unit(code, coeffs, frk, p, np.uint64(x))
            if v < ht:
                win = 0
                break
            if v == ht:
                tie = 1
                if x < target:
                    win = 0
                    break
        out[t, 0] = win
        out[t, 1] = tie
    return out


@njit(cache=True, nogil=True)
def nb_mixture_trials(n, s, ell, q_thr, p1_thr, p2_thr, keys, target, probe):
    """Per trial: strategy, win, tie, then g at each probe key."""
    out = np.zeros((keys.shape[0], 3 + probe.shape[0]), dtype=np.int64)
    g = np.empty(n + 1, dtype=np.int64)
    u = np.empty(n + 1, dtype=np.uint64)
    for t in range(keys.shape[0]):
        strategy = nb_mixture_draw(n, s, ell, q_thr, p1_thr, p2_thr, keys[t], g, u)
        gt = g[target]
        ut = u[target]
        win = 1
        tie = 0
        for x in range(n + 1):
            if x == target:
                continue
            if g[x] < gt or (g[x] == gt and u[x] < ut):
                win = 0
                break
            if g[x] == gt and u[x] == ut:
                tie = 1
                if x < target:
                    win = 0
                    break
        out[t, 0] = strategy
        out[t, 1] = win
        out[t, 2] = tie
        for j in range(probe.shape[0]):
            out[t, 3 + j] = g[probe[j]]
    return out


def mixture_trials(params: MinwiseMixParams, trials: int, seed: int, experiment_id: str,
                   target: int = 0, probe: Sequence[int] = (), workers: int = 1) -> np.ndarray:
    """Raw per-trial rows of the min-wise mixture (see :func:`nb_mixture_trials`)."""
    q_thr, p1_thr, p2_thr = params.thresholds()
    probe_arr = np.asarray(list(probe), dtype=np.int64)
    if probe_arr.size and (probe_arr.min() < 0 or probe_arr.max() > params.n):
        raise ConfigError("probe keys outside [0, n]")

    def kernel(keys):
        return nb_mixture_trials(params.n, params.s, params.ell, q_thr, p1_thr, p2_thr, keys, target, probe_arr)

    return run_trials(kernel, trials, seed, experiment_id, workers)


def estimate_minwise(n: int, target_index: int, family, trials: int, seed: int,
                     experiment_id: str | None = None, workers: int = 1) -> Estimate:
    """Pr(the target is the strict minimum of ``h`` over keys ``0..n``).

    ``family`` is a :class:`FullRandom`, a :class:`Polynomial`, or the mixture
    parameters (:class:`MinwiseMixParams`) whose key set must have ``n + 1`` keys.
    Ties at the minimum go to the smaller key index.
    """
    if not 0 <= target_index <= n:
        raise ConfigError(f"target {target_index} outside [0, {n}]")
    eid = experiment_id or f"minwise/n={n}/target={target_index}/{_family_tag(family)}"
    if isinstance(family, MinwiseMixParams):
        if family.n != n:
            raise ConfigError(f"mixture built for n={family.n}, asked for n={n}")
        rows = mixture_trials(family, trials, seed, eid, target_index, (), workers)
        wins, ties = rows[:, 1], rows[:, 2]
        extras = {"ties": int(ties.sum()),
                  "strategy_counts": {i: int((rows[:, 0] == i).sum()) for i in (1, 2, 3, 4)}}
    else:
        code, k, p = family.kernel_args()
        if isinstance(family, Polynomial) and n >= family.prime:
            raise ConfigError("key set exceeds the field")

        def kernel(keys):
            return nb_minwise_trials(code, k, p, keys, n, target_index)

        rows = run_trials(kernel, trials, seed, eid, workers)
        wins, ties = rows[:, 0], rows[:, 1]
        extras = {"ties": int(ties.sum())}
    return Estimate.from_samples(wins, (seed, eid), indicator=True, extras=extras)


def _family_tag(family) -> str:
    if isinstance(family, MinwiseMixParams):
        return "adv-minwise2"
    return family.describe()


# --- "A before B" counts ---------------------------------------------------


def dyadic_sets(i: int, level: int, n: int) -> tuple:
    """``A = [i, i + 2^(level-1))`` and ``B = [i + 2^(level-1), i + 2^level)``, clipped to ``[n]``."""
    if level < 1:
        raise ConfigError("level must be >= 1")
    half = 1 << (level - 1)
    a = range(max(0, i), min(i + half, n))
    b = range(max(0, i + half), min(i + 2 * half, n))
    return list(a), list(b)


def _check_sets(a, b, universe: int) -> tuple:
    a, b = sorted(set(a)), sorted(set(b))
    if set(a) & set(b):
        raise InvalidSets("A and B must be disjoint")
    if len(a) > len(b):
        raise InvalidSets("need |A| <= |B|")
    if any(not 0 <= v < universe for v in a + b):
        raise InvalidSets(f"set elements must lie in [0, {universe})")
    return a, b


@njit(cache=True, nogil=True)
def nb_c1_trials(code, k, p, keys, n, r, in_a, in_b):
    out = np.zeros(keys.shape[0], dtype=np.int64)
    ur = np.uint64(r)
    for t in range(keys.shape[0]):
        coeffs, frk = nb_prepare(code, k, p, keys[t])
        c = 0
        for i in range(n):
            y = nb_range(code, coeffs, frk, p, np.uint64(i), ur)
            if in_b[y]:
                break
            if in_a[y]:
                c += 1
        out[t] = c
    return out


def estimate_C_setting1(n: int, A, B, family, trials: int, seed: int, range_size: int | None = None,
                        experiment_id: str | None = None, workers: int = 1) -> Estimate:
    """Number of ``i`` with ``h(i)`` in A before the first ``i`` with ``h(i)`` in B.

    ``h`` maps ``[n]`` to ``[range_size]`` (default ``n``).
    """
    r = n if range_size is None else range_size
    a, b = _check_sets(A, B, r)
    family.check_range(r)
    if isinstance(family, Polynomial) and n > family.prime:
        raise ConfigError("key set exceeds the field")
    in_a = np.zeros(r, dtype=np.bool_)
    in_b = np.zeros(r, dtype=np.bool_)
    in_a[a] = True
    in_b[b] = True
    code, k, p = family.kernel_args()
    eid = experiment_id or f"C1/n={n}/r={r}/A={_span(a)}/B={_span(b)}/{family.describe()}"

    def kernel(keys):
        return nb_c1_trials(code, k, p, keys, n, r, in_a, in_b)

    vals = run_trials(kernel, trials, seed, eid, workers)
    return Estimate.from_samples(vals, (seed, eid))


def enumerate_C_setting1(n: int, A, B, prime: int, k: int) -> Fraction:
    """Exact E(C) for the polynomial family with range ``p`` by enumerating all ``p^k`` draws."""
    a, b = _check_sets(A, B, prime)
    if n > prime:
        raise ConfigError("n must not exceed p")
    sa, sb = set(a), set(b)
    total = 0
    draws = 0
    for coeffs in itertools.product(range(prime), repeat=k):
        draws += 1
        for i in range(n):
            y = 0
            for c in coeffs:
                y = (y * i + c) % prime
            if y in sb:
                break
            if y in sa:
                total += 1
    return Fraction(total, draws)


def enumerate_C_setting1_full_random(n: int, A, B) -> Fraction:
    """Exact E(C) when ``h: [n] -> [n]`` is uniform over all ``n^n`` functions."""
    a, b = _check_sets(A, B, n)
    sa, sb = set(a), set(b)
    total = 0
    for h in itertools.product(range(n), repeat=n):
        for y in h:
            if y in sb:
                break
            if y in sa:
                total += 1
    return Fraction(total, n**n)


@njit(cache=True, nogil=True)
def nb_c2_trials(code, k, p, keys, a, b):
    out = np.zeros(keys.shape[0], dtype=np.int64)
    for t in range(keys.shape[0]):
        coeffs, frk = nb_prepare(code, k, p, keys[t])
        mb = nb_unit(code, coeffs, frk, p, b[0])
        for j in range(1, b.shape[0]):
            v = nb_unit(code, coeffs, frk, p, b[j])
            if v < mb:
                mb = v
        c = 0
        for j in range(a.shape[0]):
            if nb_unit(code, coeffs, frk, p, a[j]) < mb:
                c += 1
        out[t] = c
    return out


def estimate_C_setting2(A, B, family, trials: int, seed: int, experiment_id: str | None = None,
                        workers: int = 1) -> Estimate:
    """Number of ``a`` in A hashing strictly below every ``b`` in B."""
    universe = family.prime if isinstance(family, Polynomial) else 1 << 63
    a, b = _check_sets(A, B, universe)
    if not a:
        return Estimate.from_samples(np.zeros(trials), (seed, experiment_id or "C2/empty"))
    code, k, p = family.kernel_args()
    ua = np.asarray(a, dtype=np.uint64)
    ub = np.asarray(b, dtype=np.uint64)
    eid = experiment_id or f"C2/A={_span(a)}/B={_span(b)}/{family.describe()}"

    def kernel(keys):
        return nb_c2_trials(code, k, p, keys, ua, ub)

    vals = run_trials(kernel, trials, seed, eid, workers)
    return Estimate.from_samples(vals, (seed, eid))


def enumerate_C_setting2_full_random(m_a: int, m_b: int) -> Fraction:
    """Exact E|{a : h(a) < min h(B)}| under a uniformly random ordering of A and B."""
    keys = ["a"] * m_a + ["b"] * m_b
    total = 0
    count = 0
    for order in itertools.permutations(range(m_a + m_b)):
        count += 1
        for idx in order:
            if keys[idx] == "b":
                break
            total += 1
    return Fraction(total, count)


def _span(xs) -> str:
    if not xs:
        return "empty"
    if xs == list(range(xs[0], xs[-1] + 1)):
        return f"{xs[0]}..{xs[-1]}"
    return ",".join(map(str, xs))


# --- moments of sums of indicators ------------------------------------------


@njit(cache=True, nogil=True)
def nb_indicator_sum_trials(code, k, p, keys, n, r, threshold):
    out = np.zeros(keys.shape[0], dtype=np.int64)
    ur = np.uint64(r)
    uth = np.uint64(threshold)
    for t in range(keys.shape[0]):
        coeffs, frk = nb_prepare(code, k, p, keys[t])
        c = 0
        for i in range(n):
            if nb_range(code, coeffs, frk, p, np.uint64(i), ur) < uth:
                c += 1
        out[t] = c
    return out


def binomial_central_moment(n: int, mu: Fraction, order: int) -> Fraction:
    """Exact ``E(X - n mu)^order`` for ``X ~ Binomial(n, mu)``."""
    mu = Fraction(mu)
    mean = n * mu
    return sum(
        (Fraction(math.comb(n, j)) * mu**j * (1 - mu) ** (n - j) * (j - mean) ** order for j in range(n + 1)),
        Fraction(0),
    )


def empirical_central_moment(n: int, mu, family, order: int, trials: int, seed: int,
                             experiment_id: str | None = None, workers: int = 1) -> Estimate:
    """``E(X - EX)^order`` for ``X = sum_i [h(i) < mu]`` over ``n`` keys.

    ``mu`` is a rational; the indicator of key ``i`` is ``h(i) mod-range
    denominator(mu) < numerator(mu)``.  ``extras['envelope_ratio']`` is the
    estimate divided by ``EX + EX^(order/2)``.
    """
    if order < 2 or order % 2:
        raise ConfigError("order must be an even integer >= 2")
    mu = Fraction(mu)
    if not 0 <= mu <= 1:
        raise ConfigError("mu must lie in [0, 1]")
    eid = experiment_id or f"moment/n={n}/mu={mu}/r={order}/{family.describe()}"
    if mu == 0 or mu == 1:
        return Estimate.from_samples(np.zeros(trials), (seed, eid), extras={"envelope_ratio": 0.0})
    r = mu.denominator
    family.check_range(r)
    code, k, p = family.kernel_args()

    def kernel(keys):
        return nb_indicator_sum_trials(code, k, p, keys, n, r, mu.numerator)

    sums = run_trials(kernel, trials, seed, eid, workers)
    ex = n * mu
    vals = (sums - float(ex)) ** order
    est = Estimate.from_samples(vals, (seed, eid))
    env = float(ex) + float(ex) ** (order / 2)
    est.extras["envelope_ratio"] = est.mean / env
    return est


# --- chi-square, fits, the integral-sum fact ---------------------------------


def chi_square_uniform(counts) -> tuple:
    """Pearson statistic against the uniform law and its upper-tail p-value."""
    obs = np.asarray(counts, dtype=np.float64).ravel()
    if obs.size < 2:
        raise ConfigError("need at least two cells")
    expected = obs.sum() / obs.size
    if expected < 5:
        raise CellCountTooLow(f"expected count per cell {expected:.3g} < 5")
    stat = float(((obs - expected) ** 2).sum() / expected)
    return stat, float(special.gammaincc((obs.size - 1) / 2.0, stat / 2.0))


def pair_difference_counts(x, y, cells: int) -> np.ndarray:
    """Counts of ``(x - y) mod cells``.

    Each class is a set of ``cells`` cells of the square ``[cells]^2``, so under a
    uniform joint law the classes are equiprobable; this is the coarsening used
    when the full square has too many cells for the sample.
    """
    return np.bincount((np.asarray(x) - np.asarray(y)) % cells, minlength=cells)


@dataclass(frozen=True)
class ScalingFit:
    points: tuple
    model: str
    params: dict
    residual: float
    advisory: bool


def fit_scaling(points, model: str = "pow") -> ScalingFit:
    """Fit ``mean ~ c n^alpha`` (``pow``) or ``mean ~ c n (log2 n)^beta`` (``nlog``).

    Least squares in log coordinates.  ``advisory`` is set when the points span
    fewer than three doublings of ``n``.
    """
    pts = sorted((float(n), float(m)) for n, m in points)
    if len(pts) < 4:
        raise InsufficientPoints(f"need >= 4 points, got {len(pts)}")
    ns = np.array([p[0] for p in pts])
    ms = np.array([p[1] for p in pts])
    if (ms <= 0).any() or (ns <= 1).any():
        raise ConfigError("fit needs n > 1 and positive means")
    advisory = ns[-1] / ns[0] < 8
    if model == "pow":
        x, y = np.log(ns), np.log(ms)
        slope, icpt = np.polyfit(x, y, 1)
        res = y - (slope * x + icpt)
        params = {"alpha": float(slope), "c": float(math.exp(icpt))}
    elif model == "nlog":
        lg = np.log2(ns)
        norm = ms / (ns * lg)
        x, y = np.log(lg), np.log(ms / ns)
        slope, icpt = np.polyfit(x, y, 1)
        res = y - (slope * x + icpt)
        params = {
            "beta": float(slope),
            "c": float(math.exp(icpt)),
            "trend_ratio": float(norm.max() / norm.min()),
            "normalized": [float(v) for v in norm],
        }
    else:
        raise ConfigError(f"unknown model {model!r}")
    return ScalingFit(tuple(pts), model, params, float(math.sqrt(np.mean(res**2))), bool(advisory))


class FunkySum(NamedTuple):
    partial: float
    bound: float
    tail: float
    passed: bool


def funkysum_check(r: float, terms: int = 10**4) -> FunkySum:
    """Check ``sum_{l>=1} (r+l)^-4 <= r^-3`` with the tail past ``terms`` bounded by its integral."""
    if r <= 0:
        raise ConfigError("r must be positive")
    if terms < 10**4:
        raise ConfigError("terms must be >= 1e4")
    partial = math.fsum((r + l) ** -4 for l in range(1, terms + 1))
    tail = 1.0 / (3.0 * (r + terms) ** 3)
    bound = r**-3
    return FunkySum(partial, bound, tail, partial + tail <= bound)
