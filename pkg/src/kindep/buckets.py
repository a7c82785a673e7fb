"""Balls into buckets: loads, max load, falling-factorial moments and the tail bound."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .adversarial import BucketAdversaryDraw, BucketAdversaryParams, ball_positions, nb_bucket_positions
from .errors import ConfigError, HypothesisViolated
from .estimators import Estimate, run_trials
from .families import FullRandom, Polynomial, nb_prepare, nb_range
from .field import PolyDraw, RangeMap, to_range

_ADVERSARY = 2


@dataclass(frozen=True)
class BucketLoads:
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.size)

    @property
    def balls(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class MomentStat:
    k: int
    value: int


@dataclass(frozen=True)
class TailCheck:
    empirical: float
    bound: float
    sigma: float
    threshold: int
    trials: int
    histogram: dict = field(repr=False)
    advisory: str | None = None

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 3 * self.sigma


def _positions(n_balls: int, n_buckets: int, family, seed: int) -> np.ndarray:
    if isinstance(family, (FullRandom, Polynomial)):
        return family.range_values(seed, np.arange(n_balls), n_buckets)
    if isinstance(family, BucketAdversaryParams):
        _check_adversary(family, n_balls, n_buckets)
        return nb_bucket_positions(family.n, family.prime, family.t, family.k, np.uint64(seed))
    if isinstance(family, BucketAdversaryDraw):
        _check_adversary(family.params, n_balls, n_buckets)
        return ball_positions(family)
    if isinstance(family, PolyDraw):
        rmap = RangeMap(n_buckets, "exact-small" if n_buckets == family.family.p else "scaled")
        return np.array([to_range(family, i, rmap) for i in range(n_balls)], dtype=np.int64)
    raise ConfigError(f"unsupported family {family!r}")


def _check_adversary(params: BucketAdversaryParams, n_balls: int, n_buckets: int) -> None:
    if n_balls != params.n or n_buckets != params.n:
        raise ConfigError(f"the bucket adversary throws {params.n} balls into {params.n} buckets")


def throw(n_balls: int, n_buckets: int, family, seed: int) -> BucketLoads:
    """Loads after hashing balls ``0..n_balls-1``.

    ``family`` is a plain family (the function is fixed by ``seed``), bucket
    adversary parameters, or an already fixed function (a polynomial draw or
    an adversary draw, for which ``seed`` is ignored).
    """
    if n_balls < 1 or n_buckets < 1:
        raise ConfigError("need at least one ball and one bucket")
    pos = _positions(n_balls, n_buckets, family, seed)
    return BucketLoads(np.bincount(pos, minlength=n_buckets).astype(np.int64))


def max_load(loads: BucketLoads) -> int:
    return int(loads.counts.max())


def falling_factorial_moment(loads: BucketLoads, k: int) -> MomentStat:
    """``sum_i B_i (B_i - 1) ... (B_i - k + 1)``: ordered k-tuples of balls sharing a bucket."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    return MomentStat(k, sum(math.perm(int(b), k) for b in loads.counts))


def moment_identity_value(n: int, k: int) -> float:
    """Expected k-th falling-factorial moment for any k-independent family (n balls, n buckets)."""
    return math.perm(n, k) / n ** (k - 1)


# --- Monte Carlo ---------------------------------------------------------------


@njit(cache=True, nogil=True)
def nb_load_trials(code, k, p, extra, keys, n_balls, n_buckets, order, threshold):
    """Per trial: max load, falling-factorial moment of ``order``, max >= threshold."""
    out = np.zeros((keys.shape[0], 3), dtype=np.int64)
    counts = np.zeros(n_buckets, dtype=np.int64)
    ur = np.uint64(n_buckets)
    for t in range(keys.shape[0]):
        counts[:] = 0
        if code == _ADVERSARY:
            pos = nb_bucket_positions(n_balls, extra[0], extra[1], k, keys[t])
            for i in range(n_balls):
                counts[pos[i]] += 1
        else:
            coeffs, frk = nb_prepare(code, k, p, keys[t])
            for i in range(n_balls):
                counts[np.int64(nb_range(code, coeffs, frk, p, np.uint64(i), ur))] += 1
        best = 0
        mom = 0
        for b in range(n_buckets):
            c = counts[b]
            if c > best:
                best = c
            f = 1
            for j in range(order):
                f *= c - j
            mom += f
        out[t, 0] = best
        out[t, 1] = mom
        out[t, 2] = 1 if best >= threshold else 0
    return out


def _kernel_args(family, n_balls: int, n_buckets: int):
    if isinstance(family, (FullRandom, Polynomial)):
        family.check_range(n_buckets)
        code, k, p = family.kernel_args()
        return code, k, p, np.zeros(2, np.int64)
    if isinstance(family, BucketAdversaryParams):
        _check_adversary(family, n_balls, n_buckets)
        return np.int64(_ADVERSARY), family.k, np.uint64(0), np.array([family.prime, family.t], np.int64)
    raise ConfigError(f"unsupported family for Monte Carlo loads: {family!r}")


def load_trials(n_balls: int, n_buckets: int, family, trials: int, seed: int, experiment_id: str,
                order: int = 1, threshold: int = 0, workers: int = 1) -> np.ndarray:
    """Raw per-trial rows ``(max load, moment, exceeded)``."""
    if n_balls < 1 or n_buckets < 1:
        raise ConfigError("need at least one ball and one bucket")
    if order < 1:
        raise ConfigError("moment order must be >= 1")
    if order > 1 and math.perm(n_balls, order) >= 1 << 62:
        raise ConfigError("falling-factorial moment would overflow 64-bit counters")
    code, k, p, extra = _kernel_args(family, n_balls, n_buckets)

    def kernel(keys):
        return nb_load_trials(code, k, p, extra, keys, n_balls, n_buckets, order, threshold)

    return run_trials(kernel, trials, seed, experiment_id, workers)


def _tag(family) -> str:
    if isinstance(family, BucketAdversaryParams):
        return f"adv-bucket(m={family.m}, k={family.k})"
    return family.describe()


def max_load_histogram(max_loads) -> dict:
    return dict(sorted(Counter(int(v) for v in max_loads).items()))


def estimate_max_load(n: int, family, trials: int, seed: int, experiment_id: str | None = None,
                      workers: int = 1) -> Estimate:
    eid = experiment_id or f"buckets/max-load/n={n}/{_tag(family)}"
    rows = load_trials(n, n, family, trials, seed, eid, workers=workers)
    return Estimate.from_samples(rows[:, 0], (seed, eid), extras={"histogram": max_load_histogram(rows[:, 0])})


def verify_moment_identity(n: int, k: int, family, trials: int, seed: int, experiment_id: str | None = None,
                           workers: int = 1) -> Estimate:
    """Monte Carlo mean of the k-th falling-factorial moment; ``extras['exact']`` is the k-independent value."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    eid = experiment_id or f"moments/n={n}/k={k}/{_tag(family)}"
    rows = load_trials(n, n, family, trials, seed, eid, order=k, workers=workers)
    return Estimate.from_samples(rows[:, 1], (seed, eid), extras={"exact": moment_identity_value(n, k)})


def tail_bound_check(n: int, m: int, k: int, family, trials: int, seed: int, experiment_id: str | None = None,
                     workers: int = 1) -> TailCheck:
    """Empirical ``Pr(max load >= m + k)`` against the bound ``n / m^k``."""
    if k < 1 or m < 1:
        raise ConfigError("need k >= 1 and m >= 1")
    if k**k >= n:
        raise HypothesisViolated(f"k < n^(1/k) fails: k^k = {k**k} >= n = {n}")
    advisory = None
    scale = math.log(n) / math.log(math.log(n)) if n > 15 else 1.0
    if m < scale:
        advisory = f"m={m} is below log n / log log n = {scale:.2f}; the bound is not expected to be tight"
    threshold = m + k
    eid = experiment_id or f"buckets/tail/n={n}/m={m}/k={k}/{_tag(family)}"
    rows = load_trials(n, n, family, trials, seed, eid, threshold=threshold, workers=workers)
    hits = rows[:, 2]
    freq = float(hits.mean())
    sigma = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
    return TailCheck(freq, n / m**k, sigma, threshold, trials, max_load_histogram(rows[:, 0]), advisory)


def adversary_exceedance(params: BucketAdversaryParams, trials: int, seed: int, experiment_id: str | None = None,
                         workers: int = 1) -> Estimate:
    """Frequency of a bucket holding at least ``p/2`` balls under the adversarial family."""
    threshold = math.ceil(params.prime / 2)
    eid = experiment_id or f"buckets/adversary/n={params.n}/m={params.m}/k={params.k}"
    rows = load_trials(params.n, params.n, params, trials, seed, eid, threshold=threshold, workers=workers)
    return Estimate.from_samples(rows[:, 2], (seed, eid), indicator=True,
                                 extras={"histogram": max_load_histogram(rows[:, 0]), "threshold": threshold,
                                         "ratio": params.ratio()})
