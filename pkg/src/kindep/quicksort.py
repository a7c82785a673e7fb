"""Quicksort driven by limited-independence pivot choices, with comparison accounting.

Setting 1: a precomputed stream ``Y_1..Y_n`` of indices in ``[n]``; pivot ``i`` is
the element originally at index ``Y_i``.  The stream is processed globally
against the live partition of the array: a pivot splits whichever segment
currently holds it, and a repeated index is skipped.  Segments still unsorted
after the stream is exhausted are insertion-sorted (the cleanup phase).

Setting 2: labels ``Z_1..Z_n`` in the unit interval; the pivot order is the
ascending order of the labels, so every element eventually pivots and there is
no cleanup.  Colliding labels force a redraw of the whole vector.

Partitioning is stable: the pivot is compared once with every other element of
its segment, smaller elements keep their relative order on the left, larger on
the right.  Only comparisons are counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng
from .adversarial import BucketAdversaryParams, MinwiseMixParams, nb_bucket_positions, nb_mixture_draw
from .errors import ConfigError, RedrawLimitExceeded
from .estimators import Estimate, run_trials
from .families import FullRandom, Polynomial, nb_prepare, nb_range, nb_unit

MAX_REDRAWS = 64

_SOURCE_FULL_RANDOM = 0
_SOURCE_POLY = 1
_SOURCE_BUCKET = 2
_SOURCE_MIXTURE = 3


@dataclass(frozen=True)
class SortInput:
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.int64)
        if np.unique(v).size != v.size:
            raise ConfigError("sort input must have distinct values")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @classmethod
    def identity(cls, n: int) -> "SortInput":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def shuffled(cls, n: int, seed: int) -> "SortInput":
        v = np.arange(n, dtype=np.int64)
        rng.nb_shuffle(v, np.uint64(rng.derive(seed, rng.TAG_INPUT)), np.uint64(0))
        return cls(v)


@dataclass(frozen=True)
class PivotSource:
    """Where pivot randomness comes from.

    ``family`` is :class:`FullRandom`, :class:`Polynomial`, bucket-adversary
    parameters (Setting 1 only, the ball positions are the index stream) or
    mixture parameters (Setting 2 only, its hash values are the labels).
    """

    mode: str
    family: object

    def __post_init__(self):
        if self.mode not in ("setting1", "setting2"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if isinstance(self.family, BucketAdversaryParams) and self.mode != "setting1":
            raise ConfigError("the bucket adversary yields indices; use it in setting1")
        if isinstance(self.family, MinwiseMixParams) and self.mode != "setting2":
            raise ConfigError("the min-wise mixture yields unit values; use it in setting2")

    @property
    def k(self) -> int | None:
        return getattr(self.family, "k", None)

    def kernel_args(self, n: int):
        """``(source code, k, p, extra int params)`` for the compiled runner."""
        fam = self.family
        if isinstance(fam, FullRandom):
            return _SOURCE_FULL_RANDOM, 1, np.uint64(fam.kernel_args()[2]), np.zeros(4, np.int64)
        if isinstance(fam, Polynomial):
            if self.mode == "setting1":
                fam.check_range(n)
            if n > fam.prime:
                raise ConfigError("input larger than the field")
            return _SOURCE_POLY, fam.k, np.uint64(fam.prime), np.zeros(4, np.int64)
        if isinstance(fam, BucketAdversaryParams):
            if fam.n != n:
                raise ConfigError(f"bucket adversary built for n={fam.n}, input has n={n}")
            return _SOURCE_BUCKET, fam.k, np.uint64(0), np.array([fam.prime, fam.t, 0, 0], np.int64)
        if isinstance(fam, MinwiseMixParams):
            if fam.n + 1 != n:
                raise ConfigError(f"mixture has {fam.n + 1} keys, input has n={n}")
            q, p1, p2 = fam.thresholds()
            return _SOURCE_MIXTURE, 2, np.uint64(0), np.array([fam.s, q, p1, p2], np.int64)
        raise ConfigError(f"unsupported pivot family {fam!r}")


@dataclass
class PivotTrace:
    comparisons_partition: int
    comparisons_cleanup: int
    pivots_executed: int
    pivots_skipped: int
    cleanup_segments: list
    redraws: int
    per_element: np.ndarray = field(repr=False)
    output: np.ndarray = field(repr=False)

    @property
    def comparisons(self) -> int:
        return self.comparisons_partition + self.comparisons_cleanup

    @property
    def max_per_element(self) -> int:
        return int(self.per_element.max()) if self.per_element.size else 0


# --- compiled core ---------------------------------------------------------


@njit(cache=True, nogil=True)
def nb_sort_with_pivots(values, pivots, cleanup):
    """Run the pivot sequence, then (optionally) insertion-sort the leftovers.

    Returns ``(arrangement, partition comparisons, cleanup comparisons,
    executed, skipped, per-element counts, cleanup segment lengths)``.
    """
    n = values.shape[0]
    arr = np.arange(n)
    pos = np.arange(n)
    fixed = np.zeros(n, dtype=np.bool_)
    done = np.zeros(n, dtype=np.bool_)
    per = np.zeros(n, dtype=np.int64)
    left = np.empty(n, dtype=np.int64)
    right = np.empty(n, dtype=np.int64)
    comps = 0
    executed = 0
    skipped = 0
    for e in pivots:
        if done[e]:
            skipped += 1
            continue
        q = pos[e]
        lo = q
        while lo > 0 and not fixed[lo - 1]:
            lo -= 1
        hi = q + 1
        while hi < n and not fixed[hi]:
            hi += 1
        v = values[e]
        nl = 0
        nr = 0
        for i in range(lo, hi):
            x = arr[i]
            if x == e:
                continue
            comps += 1
            per[x] += 1
            if values[x] < v:
                left[nl] = x
                nl += 1
            else:
                right[nr] = x
                nr += 1
        w = lo
        for i in range(nl):
            arr[w] = left[i]
            pos[left[i]] = w
            w += 1
        arr[w] = e
        pos[e] = w
        fixed[w] = True
        w += 1
        for i in range(nr):
            arr[w] = right[i]
            pos[right[i]] = w
            w += 1
        done[e] = True
        executed += 1

    clean = 0
    segs = np.empty(n, dtype=np.int64)
    nseg = 0
    if cleanup:
        i = 0
        while i < n:
            if fixed[i]:
                i += 1
                continue
            j = i
            while j < n and not fixed[j]:
                j += 1
            if j - i >= 2:
                segs[nseg] = j - i
                nseg += 1
                for a in range(i + 1, j):
                    b = a
                    while b > i:
                        clean += 1
                        if values[arr[b - 1]] > values[arr[b]]:
                            tmp = arr[b - 1]
                            arr[b - 1] = arr[b]
                            arr[b] = tmp
                            b -= 1
                        else:
                            break
            i = j
    return arr, comps, clean, executed, skipped, per, segs[:nseg]


@njit(cache=True, nogil=True)
def nb_setting1_pivots(code, k, p, extra, key, n):
    out = np.empty(n, dtype=np.int64)
    if code == _SOURCE_BUCKET:
        return nb_bucket_positions(n, extra[0], extra[1], k, key)
    coeffs, frk = nb_prepare(code, k, p, key)
    un = np.uint64(n)
    for i in range(n):
        out[i] = np.int64(nb_range(code, coeffs, frk, p, np.uint64(i), un))
    return out


@njit(cache=True, nogil=True)
def nb_setting2_pivots(code, k, p, extra, key, n):
    """Pivot order from the labels; redraws on collision.  Returns ``(order, redraws)``."""
    attempt_key = key
    for attempt in range(MAX_REDRAWS + 1):
        if code == _SOURCE_MIXTURE:
            g = np.empty(n, dtype=np.int64)
            u = np.empty(n, dtype=np.uint64)
            nb_mixture_draw(n - 1, extra[0], 100 * extra[0], extra[1], extra[2], extra[3], attempt_key, g, u)
            by_u = np.argsort(u, kind="mergesort")
            order = by_u[np.argsort(g[by_u], kind="mergesort")]
            clash = False
            for i in range(1, n):
                if g[order[i]] == g[order[i - 1]] and u[order[i]] == u[order[i - 1]]:
                    clash = True
                    break
        else:
            coeffs, frk = nb_prepare(code, k, p, attempt_key)
            z = np.empty(n, dtype=np.uint64)
            for i in range(n):
                z[i] = nb_unit(code, coeffs, frk, p, np.uint64(i))
            order = np.argsort(z, kind="mergesort")
            clash = False
            for i in range(1, n):
                if z[order[i]] == z[order[i - 1]]:
                    clash = True
                    break
        if not clash:
            return order, attempt
        attempt_key = rng.nb_derive(attempt_key, np.uint64(rng.TAG_REDRAW))
    return np.empty(0, dtype=np.int64), MAX_REDRAWS + 1


@njit(cache=True, nogil=True)
def nb_input(n, key, shuffled):
    v = np.arange(n)
    if shuffled:
        rng.nb_shuffle(v, rng.nb_derive(key, np.uint64(rng.TAG_INPUT)), np.uint64(0))
    return v


@njit(cache=True, nogil=True)
def nb_comparison_trials(setting, code, k, p, extra, keys, n, shuffled):
    """Per trial: total, partition, cleanup, max per element, skipped, redraws, sorted-ok."""
    out = np.zeros((keys.shape[0], 7), dtype=np.int64)
    for t in range(keys.shape[0]):
        values = nb_input(n, keys[t], shuffled)
        if setting == 1:
            piv = nb_setting1_pivots(code, k, p, extra, keys[t], n)
            redraws = 0
        else:
            piv, redraws = nb_setting2_pivots(code, k, p, extra, keys[t], n)
            if redraws > MAX_REDRAWS:
                out[t, 5] = redraws
                continue
        arr, comps, clean, executed, skipped, per, segs = nb_sort_with_pivots(values, piv, setting == 1)
        ok = 1
        for i in range(1, n):
            if values[arr[i - 1]] > values[arr[i]]:
                ok = 0
        out[t, 0] = comps + clean
        out[t, 1] = comps
        out[t, 2] = clean
        out[t, 3] = per.max() if n > 0 else 0
        out[t, 4] = skipped
        out[t, 5] = redraws
        out[t, 6] = ok
    return out


# --- public API --------------------------------------------------------------


def _trace(values, order, cleanup, redraws) -> PivotTrace:
    arr, comps, clean, executed, skipped, per, segs = nb_sort_with_pivots(values, order, cleanup)
    out = values[arr]
    if out.size > 1 and not (np.diff(out) > 0).all():
        raise RuntimeError("quicksort produced unsorted output")
    return PivotTrace(int(comps), int(clean), int(executed), int(skipped), [int(s) for s in segs],
                      int(redraws), per, out)


def run_with_pivots(sort_input: SortInput, pivot_indices, cleanup: bool = True) -> PivotTrace:
    """Setting-1 sort for an explicit index stream (no randomness involved)."""
    piv = np.ascontiguousarray(pivot_indices, dtype=np.int64)
    if piv.size and (piv.min() < 0 or piv.max() >= sort_input.n):
        raise ConfigError("pivot indices outside [n]")
    return _trace(sort_input.values, piv, cleanup, 0)


def run_setting1(sort_input: SortInput, source: PivotSource, seed: int) -> PivotTrace:
    if source.mode != "setting1":
        raise ConfigError("source is not in setting1 mode")
    n = sort_input.n
    if n == 0:
        return _trace(sort_input.values, np.empty(0, np.int64), True, 0)
    code, k, p, extra = source.kernel_args(n)
    piv = nb_setting1_pivots(code, k, p, extra, np.uint64(seed), n)
    return _trace(sort_input.values, piv, True, 0)


def setting2_order(n: int, source: PivotSource, seed: int) -> tuple:
    code, k, p, extra = source.kernel_args(n)
    order, redraws = nb_setting2_pivots(code, k, p, extra, np.uint64(seed), n)
    if redraws > MAX_REDRAWS:
        raise RedrawLimitExceeded(f"labels collided {MAX_REDRAWS + 1} times in a row")
    return order, int(redraws)


def run_setting2(sort_input: SortInput, source: PivotSource, seed: int) -> PivotTrace:
    if source.mode != "setting2":
        raise ConfigError("source is not in setting2 mode")
    n = sort_input.n
    if n == 0:
        return _trace(sort_input.values, np.empty(0, np.int64), False, 0)
    order, redraws = setting2_order(n, source, seed)
    return _trace(sort_input.values, order, False, redraws)


@dataclass(frozen=True)
class ComparisonEstimate:
    total: Estimate
    max_per_element: Estimate
    partition: Estimate
    cleanup: Estimate
    redraws: int


def estimate_comparisons(n: int, source: PivotSource, trials: int, seed: int, shuffled: bool = False,
                         experiment_id: str | None = None, workers: int = 1) -> ComparisonEstimate:
    """Monte Carlo comparison counts; inputs are the identity or a per-trial random permutation."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    code, k, p, extra = source.kernel_args(n)
    setting = 1 if source.mode == "setting1" else 2
    fam = source.family
    tag = fam.describe() if hasattr(fam, "describe") else type(fam).__name__
    eid = experiment_id or f"quicksort/{source.mode}/n={n}/{tag}/shuffled={int(shuffled)}"

    def kernel(keys):
        return nb_comparison_trials(setting, code, k, p, extra, keys, n, shuffled)

    rows = run_trials(kernel, trials, seed, eid, workers)
    if (rows[:, 5] > MAX_REDRAWS).any():
        raise RedrawLimitExceeded(f"labels collided {MAX_REDRAWS + 1} times in a row")
    if not rows[:, 6].all():
        raise RuntimeError("quicksort produced unsorted output")
    lin = (seed, eid)
    return ComparisonEstimate(
        total=Estimate.from_samples(rows[:, 0], lin),
        max_per_element=Estimate.from_samples(rows[:, 3], lin),
        partition=Estimate.from_samples(rows[:, 1], lin),
        cleanup=Estimate.from_samples(rows[:, 2], lin),
        redraws=int(rows[:, 5].sum()),
    )


# --- treaps ------------------------------------------------------------------


@njit(cache=True, nogil=True)
def nb_treap_depth(prio):
    """Max depth (root = 1) of the min-heap treap on keys ``0..n-1``; ties favour the smaller key."""
    n = prio.shape[0]
    parent = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        last = -1
        while top > 0 and prio[stack[top - 1]] > prio[i]:
            top -= 1
            last = stack[top]
        if top > 0:
            parent[i] = stack[top - 1]
        if last >= 0:
            parent[last] = i
        stack[top] = i
        top += 1
    order = np.argsort(prio, kind="mergesort")
    depth = np.zeros(n, dtype=np.int64)
    best = 0
    for idx in order:
        d = 1 if parent[idx] < 0 else depth[parent[idx]] + 1
        depth[idx] = d
        if d > best:
            best = d
    return best


def treap_depth_from_priorities(priorities) -> int:
    prio = np.ascontiguousarray(priorities)
    if prio.size == 0:
        return 0
    return int(nb_treap_depth(prio))


def treap_max_depth(n: int, priority_family, seed: int) -> int:
    if n < 1:
        raise ConfigError("n must be >= 1")
    prio = priority_family.unit_values(seed, np.arange(n))
    return int(nb_treap_depth(prio))


@njit(cache=True, nogil=True)
def nb_treap_trials(code, k, p, keys, n):
    out = np.zeros(keys.shape[0], dtype=np.int64)
    prio = np.empty(n, dtype=np.uint64)
    for t in range(keys.shape[0]):
        coeffs, frk = nb_prepare(code, k, p, keys[t])
        for i in range(n):
            prio[i] = nb_unit(code, coeffs, frk, p, np.uint64(i))
        out[t] = nb_treap_depth(prio)
    return out


def estimate_treap_depth(n: int, priority_family, trials: int, seed: int, experiment_id: str | None = None,
                         workers: int = 1) -> Estimate:
    code, k, p = priority_family.kernel_args()
    eid = experiment_id or f"treap/n={n}/{priority_family.describe()}"

    def kernel(keys):
        return nb_treap_trials(code, k, p, keys, n)

    return Estimate.from_samples(run_trials(kernel, trials, seed, eid, workers), (seed, eid))
