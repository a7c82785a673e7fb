"""Command line: run an experiment over a list of sizes and stream result rows.

    kindep minwise --family full-random --n 100 --trials 100000
    kindep quicksort --family poly --k 4 --setting 1 --n 1024 4096 16384
    kindep buckets --family adv-bucket --n 4096 --m 64 --k 2 --trials 2000
    kindep scaling --of minwise --family adv-minwise2 --n 100 400 900 1600
    kindep describe buckets

Exit status is 0 on success, 2 for a bad configuration and 3 when an
experiment cannot run (for instance a violated hypothesis).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from typing import Callable, Iterator, NamedTuple

from .adversarial import derive_bucket_params, derive_mix_params
from .buckets import adversary_exceedance, estimate_max_load, tail_bound_check, verify_moment_identity
from .errors import ConfigError, EnumerationTooLarge, ExperimentError, KindepError, UnknownExperiment
from .estimators import Estimate, clopper_pearson, estimate_minwise, fit_scaling
from .families import FullRandom, Polynomial
from .field import ENUMERATION_LIMIT, PolyHashFamily, verify_exact_independence
from .quicksort import PivotSource, estimate_comparisons

SCHEMA_VERSION = 1
HEADER = ("experiment", "params", "statistic", "mean", "ci_lo", "ci_hi", "trials", "seed", "millis")

EXPERIMENTS = ("minwise", "quicksort", "buckets", "verify-independence", "moments", "scaling")
FAMILIES = ("poly", "full-random", "adv-minwise2", "adv-bucket")
SWEEPABLE = ("minwise", "quicksort", "buckets")


class ResultRow(NamedTuple):
    experiment: str
    params: str
    statistic: str
    mean: float
    ci_lo: float
    ci_hi: float
    trials: int
    seed: int
    millis: int


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: tuple = (100,)
    k: int | None = None
    m: int | None = None
    p: int | None = None
    family: str = "full-random"
    trials: int = 10000
    seed: int = 0
    format: str = "csv"
    parallel: int = 1
    setting: int = 1
    target: int = 0
    order: str = "identity"
    of: str | None = None
    timing: bool = False

    def render(self) -> list:
        """Argument vector that :func:`parse_args` maps back to this config."""
        argv = [self.experiment, "--n", *map(str, self.n)]
        for name in ("k", "m", "p", "of"):
            value = getattr(self, name)
            if value is not None:
                argv += [f"--{name}", str(value)]
        argv += ["--family", self.family, "--trials", str(self.trials), "--seed", str(self.seed),
                 "--format", self.format, "--parallel", str(self.parallel), "--setting", str(self.setting),
                 "--target", str(self.target), "--order", self.order]
        if self.timing:
            argv.append("--timing")
        return argv

    def params(self, n: int, **extra) -> str:
        d = {"n": n, "family": self.family}
        for name in ("k", "m", "p"):
            if getattr(self, name) is not None:
                d[name] = getattr(self, name)
        d.update(extra)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kindep", description="Limited-independence hashing experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--n", type=int, nargs="+", default=[100], help="problem sizes (a list makes a sweep)")
    ap.add_argument("--k", type=int, default=None, help="independence of the poly family / moment order")
    ap.add_argument("--m", type=int, default=None, help="load parameter for buckets")
    ap.add_argument("--p", type=int, default=None, help="field prime for poly")
    ap.add_argument("--family", choices=FAMILIES, default="full-random")
    ap.add_argument("--trials", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=None, help="master seed (default: $KINDEP_SEED or 0)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--parallel", type=int, default=1, help="worker threads")
    ap.add_argument("--setting", type=int, choices=(1, 2), default=1, help="quicksort pivot setting")
    ap.add_argument("--target", type=int, default=0, help="min-wise target key")
    ap.add_argument("--order", choices=("identity", "shuffled"), default="identity", help="quicksort input order")
    ap.add_argument("--of", choices=SWEEPABLE, default=None, help="experiment swept by 'scaling'")
    ap.add_argument("--timing", action="store_true", help="fill the millis column (breaks byte-identity)")
    return ap


def _default_seed() -> int:
    raw = os.environ.get("KINDEP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"KINDEP_SEED must be an integer, got {raw!r}") from None


def parse_args(argv) -> ExperimentConfig:
    ns = _parser().parse_args(list(argv))
    values = vars(ns)
    values["n"] = tuple(values["n"])
    if values["seed"] is None:
        values["seed"] = _default_seed()
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if cfg.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("--seed must be non-negative")
    if any(n < 1 for n in cfg.n):
        raise ConfigError("--n values must be >= 1")
    if cfg.family == "poly" and cfg.k is None:
        raise ConfigError("--family poly needs --k")
    if cfg.family == "adv-bucket" and (cfg.m is None or cfg.k is None):
        raise ConfigError("--family adv-bucket needs --m and --k")
    if cfg.experiment == "scaling":
        if cfg.of is None:
            raise ConfigError("scaling needs --of")
        if len(cfg.n) < 4:
            raise ConfigError("scaling needs at least 4 values in --n")


# --- experiments -----------------------------------------------------------------


def _plain_family(cfg: ExperimentConfig):
    if cfg.family == "full-random":
        return FullRandom()
    if cfg.family == "poly":
        return Polynomial(cfg.k, cfg.p) if cfg.p else Polynomial(cfg.k)
    raise ConfigError(f"--family {cfg.family} is not supported by this experiment")


def _row(cfg, n, statistic, mean, ci, trials, **extra) -> ResultRow:
    return ResultRow(cfg.experiment if cfg.experiment != "scaling" else f"scaling/{cfg.of}",
                     cfg.params(n, **extra), statistic, float(mean), float(ci[0]), float(ci[1]),
                     int(trials), cfg.seed, 0)


def _est_row(cfg, n, statistic, est: Estimate, scale: float = 1.0, **extra) -> ResultRow:
    ci = est.binomial_ci() if est.successes is not None else est.ci95
    return _row(cfg, n, statistic, est.mean * scale, (ci[0] * scale, ci[1] * scale), est.trials, **extra)


def _exact_row(cfg, n, statistic, value, trials=1, **extra) -> ResultRow:
    return _row(cfg, n, statistic, value, (value, value), trials, **extra)


def _histogram_rows(cfg, n, hist: dict, trials: int) -> list:
    out = []
    for load, count in hist.items():
        out.append(_row(cfg, n, f"max_load_hist:{load}", count / trials, clopper_pearson(count, trials), trials))
    return out


def run_minwise(cfg: ExperimentConfig, n: int) -> list:
    fam = derive_mix_params(n) if cfg.family == "adv-minwise2" else _plain_family(cfg)
    est = estimate_minwise(n, cfg.target, fam, cfg.trials, cfg.seed, workers=cfg.parallel)
    return [
        _est_row(cfg, n, "pr_min", est, target=cfg.target),
        _est_row(cfg, n, "scaled_pr_min", est, scale=n + 1, target=cfg.target),
        _exact_row(cfg, n, "ties", est.extras["ties"], est.trials, target=cfg.target),
    ]


def run_quicksort(cfg: ExperimentConfig, n: int) -> list:
    mode = f"setting{cfg.setting}"
    size = n
    if cfg.family == "adv-bucket":
        fam = derive_bucket_params(n, cfg.m, cfg.k)
    elif cfg.family == "adv-minwise2":
        fam = derive_mix_params(n)
        size = n + 1
    else:
        fam = _plain_family(cfg)
    source = PivotSource(mode, fam)
    est = estimate_comparisons(size, source, cfg.trials, cfg.seed, shuffled=cfg.order == "shuffled",
                               workers=cfg.parallel)
    scale = 1.0 / (size * math.log2(size)) if size > 1 else 0.0
    extra = {"setting": cfg.setting, "order": cfg.order}
    rows = [
        _est_row(cfg, n, "comparisons", est.total, **extra),
        _est_row(cfg, n, "comparisons_per_nlog2n", est.total, scale=scale, **extra),
        _est_row(cfg, n, "max_per_element", est.max_per_element, **extra),
    ]
    if cfg.setting == 1:
        rows.append(_est_row(cfg, n, "cleanup", est.cleanup, **extra))
    else:
        rows.append(_exact_row(cfg, n, "redraws", est.redraws, est.total.trials, **extra))
    return rows


def run_buckets(cfg: ExperimentConfig, n: int) -> list:
    if cfg.family == "adv-bucket":
        params = derive_bucket_params(n, cfg.m, cfg.k)
        est = adversary_exceedance(params, cfg.trials, cfg.seed, workers=cfg.parallel)
        hist = est.extras["histogram"]
        loads = [v for v, c in hist.items() for _ in range(c)]
        rows = [
            _row(cfg, n, "max_load", sum(loads) / len(loads), (min(loads), max(loads)), est.trials),
            _est_row(cfg, n, "pr_max_ge_half_p", est, prime=params.prime),
            _exact_row(cfg, n, "n_over_m_pow_k", params.ratio(), est.trials),
        ]
        return rows + _histogram_rows(cfg, n, hist, est.trials)
    fam = _plain_family(cfg)
    est = estimate_max_load(n, fam, cfg.trials, cfg.seed, workers=cfg.parallel)
    rows = [_est_row(cfg, n, "max_load", est)]
    if cfg.m is not None:
        k = cfg.k or 2
        tc = tail_bound_check(n, cfg.m, k, fam, cfg.trials, cfg.seed, workers=cfg.parallel)
        lo, hi = clopper_pearson(round(tc.empirical * tc.trials), tc.trials)
        rows += [
            _row(cfg, n, "pr_max_ge_m_plus_k", tc.empirical, (lo, hi), tc.trials, threshold=tc.threshold),
            _exact_row(cfg, n, "tail_bound", tc.bound, tc.trials),
            _exact_row(cfg, n, "tail_pass", float(tc.passed), tc.trials),
        ]
    return rows + _histogram_rows(cfg, n, est.extras["histogram"], est.trials)


def run_verify_independence(cfg: ExperimentConfig, n: int) -> list:
    if cfg.family != "poly" or cfg.p is None:
        raise ConfigError("verify-independence needs --family poly, --p and --k")
    fam = PolyHashFamily(cfg.p, cfg.k)
    probes = list(itertools.combinations(range(cfg.p), cfg.k))
    if len(probes) * cfg.p**cfg.k > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{len(probes)} probe sets x p^k draws exceeds {ENUMERATION_LIMIT}")
    worst = max(verify_exact_independence(fam, pts) for pts in probes)
    return [_exact_row(cfg, cfg.p, "max_deviation", float(worst), cfg.p**cfg.k, probe_sets=len(probes))]


def run_moments(cfg: ExperimentConfig, n: int) -> list:
    k = cfg.k or 2
    fam = _plain_family(cfg)
    est = verify_moment_identity(n, k, fam, cfg.trials, cfg.seed, workers=cfg.parallel)
    exact = est.extras["exact"]
    z = (est.mean - exact) / est.stderr if est.stderr > 0 else 0.0
    return [
        _est_row(cfg, n, "falling_moment", est, order=k),
        _exact_row(cfg, n, "falling_moment_exact", exact, est.trials, order=k),
        _exact_row(cfg, n, "z_score", z, est.trials, order=k),
    ]


RUNNERS: dict[str, Callable[[ExperimentConfig, int], list]] = {
    "minwise": run_minwise,
    "quicksort": run_quicksort,
    "buckets": run_buckets,
    "verify-independence": run_verify_independence,
    "moments": run_moments,
}

_SWEEP_STAT = {"minwise": ("pr_min", "pow"), "quicksort": ("comparisons", "nlog"), "buckets": ("max_load", "pow")}


def run_rows(cfg: ExperimentConfig) -> Iterator[list]:
    """Rows grouped by parameter point, in the order of ``cfg.n``; the fit comes last for sweeps."""
    validate(cfg)
    name = cfg.of if cfg.experiment == "scaling" else cfg.experiment
    runner = RUNNERS[name]
    points = []
    sizes = cfg.n if name != "verify-independence" else cfg.n[:1]
    for n in sizes:
        t0 = time.perf_counter()
        rows = runner(cfg, n)
        if cfg.timing:
            ms = int(round((time.perf_counter() - t0) * 1000))
            rows = [r._replace(millis=ms) for r in rows]
        if cfg.experiment == "scaling":
            stat, _ = _SWEEP_STAT[name]
            points.append((n, next(r.mean for r in rows if r.statistic == stat)))
        yield rows
    if cfg.experiment == "scaling":
        stat, model = _SWEEP_STAT[name]
        fit = fit_scaling(points, model)
        last = points[-1][0]
        out = []
        for key, value in fit.params.items():
            if isinstance(value, list):
                continue
            out.append(_exact_row(cfg, last, f"fit_{key}", value, len(points), model=model, statistic_fitted=stat))
        out.append(_exact_row(cfg, last, "fit_residual", fit.residual, len(points), model=model))
        out.append(_exact_row(cfg, last, "fit_advisory", float(fit.advisory), len(points), model=model))
        yield out


# --- output ----------------------------------------------------------------------


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


class RowWriter:
    def __init__(self, stream, fmt: str):
        self.stream = stream
        self.fmt = fmt
        self._csv = csv.writer(stream, lineterminator="\n") if fmt == "csv" else None
        self._started = False

    def write(self, rows) -> None:
        if self._csv is not None and not self._started:
            self._csv.writerow(HEADER)
        self._started = True
        for row in rows:
            if self._csv is not None:
                self._csv.writerow([_cell(v) for v in row])
            else:
                self.stream.write(json.dumps(row._asdict(), separators=(",", ":")) + "\n")
        self.stream.flush()


def run(cfg: ExperimentConfig, stream=None) -> int:
    stream = stream or sys.stdout
    writer = RowWriter(stream, cfg.format)
    for rows in run_rows(cfg):
        writer.write(rows)
    return 0


# --- describe ---------------------------------------------------------------------

DESCRIPTIONS = {
    "minwise": (
        "Probability that the target key holds the strict minimum hash over keys 0..n (n+1 keys).",
        "Probes the min-wise result rows: k=2 gives Theta(sqrt(n)/n) (upper and lower bound), "
        "k=3 and k=4 give Theta(log n / n), k>=5 gives Theta(1/n).",
        "adv-minwise2 needs n = 100 s^2; poly needs --k.",
        "pr_min, scaled_pr_min ((n+1) * pr_min), ties",
    ),
    "quicksort": (
        "Comparisons made by quicksort when pivots come from a hash family.",
        "Setting 1: pivot stream Y_1..Y_n in [n] plus insertion-sort cleanup; "
        "setting 2: pivots in ascending order of unit labels.  "
        "Expected cost rows: k=2,3 O(n log^2 n), k>=4 O(n log n).",
        "adv-bucket only in setting 1, adv-minwise2 only in setting 2 (sorts n+1 keys).",
        "comparisons, comparisons_per_nlog2n, max_per_element, cleanup | redraws",
    ),
    "buckets": (
        "Max load when n balls are hashed into n buckets.",
        "With --m, the tail Pr(max >= m + k) is compared to n / m^k.  "
        "adv-bucket draws the largest-bucket family and reports Pr(max >= p/2).",
        "adv-bucket needs k < n^(1/k) and m^k >= n; the prime p is taken from [m/4, m/2].",
        "max_load, max_load_hist:<v>, pr_max_ge_m_plus_k, tail_bound, tail_pass, pr_max_ge_half_p, n_over_m_pow_k",
    ),
    "verify-independence": (
        "Exact check that degree k-1 polynomials over GF(p) are k-independent.",
        "Enumerates all p^k coefficient vectors for every choice of k distinct probe points.",
        "--family poly with --p prime and --k <= p; C(p,k) * p^k <= 1e8.",
        "max_deviation (0 means exactly uniform)",
    ),
    "moments": (
        "Monte Carlo k-th falling-factorial moment of bucket loads (n balls, n buckets).",
        "For any k-independent family the mean is n(n-1)...(n-k+1) / n^(k-1).",
        "--k is the moment order (default 2); plain families only.",
        "falling_moment, falling_moment_exact, z_score",
    ),
    "scaling": (
        "Sweep another experiment (--of) over --n and fit a scaling law.",
        "minwise and buckets fit mean ~ c n^alpha; quicksort fits comparisons ~ c n (log2 n)^beta.",
        "At least 4 sizes in --n.",
        "the swept experiment's rows, then fit_<param>, fit_residual, fit_advisory",
    ),
}


def describe(name: str) -> str:
    if name not in DESCRIPTIONS:
        raise UnknownExperiment(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    summary, probes, constraints, stats = DESCRIPTIONS[name]
    defaults = ExperimentConfig(name)
    flag_defaults = ", ".join(f"--{f.name}={getattr(defaults, f.name)!r}" for f in fields(defaults)
                              if f.name != "experiment")
    return "\n".join([
        f"{name}: {summary}",
        f"  probes: {probes}",
        f"  constraints: {constraints}",
        f"  statistics: {stats}",
        f"  defaults: {flag_defaults}",
        f"  output: columns {','.join(HEADER)} (schema v{SCHEMA_VERSION}); seed falls back to $KINDEP_SEED",
    ])


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "describe":
            if len(argv) != 2:
                raise ConfigError("usage: kindep describe <experiment>")
            print(describe(argv[1]))
            return 0
        cfg = parse_args(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"kindep: configuration error: {exc}", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"kindep: experiment error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except KindepError as exc:
        print(f"kindep: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
