"""Randomized algorithms under limited independence: hash families, adversarial
families, instrumented quicksort and balls-into-buckets, with Monte Carlo and
exact checks."""

from .adversarial import derive_bucket_params, derive_mix_params, draw_bucket_adversary, draw_minwise_adversary
from .buckets import falling_factorial_moment, max_load, tail_bound_check, throw, verify_moment_identity
from .errors import ConfigError, ExperimentError, KindepError
from .estimators import Estimate, estimate_C_setting1, estimate_C_setting2, estimate_minwise, fit_scaling
from .families import FullRandom, Polynomial
from .field import PolyHashFamily, draw_poly, find_prime_in, verify_exact_independence
from .hashers import FullRandomHasher, PolynomialHasher
from .quicksort import PivotSource, SortInput, estimate_comparisons, run_setting1, run_setting2, treap_max_depth

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Estimate",
    "ExperimentError",
    "FullRandom",
    "FullRandomHasher",
    "KindepError",
    "PivotSource",
    "PolyHashFamily",
    "Polynomial",
    "PolynomialHasher",
    "SortInput",
    "derive_bucket_params",
    "derive_mix_params",
    "draw_bucket_adversary",
    "draw_minwise_adversary",
    "draw_poly",
    "estimate_C_setting1",
    "estimate_C_setting2",
    "estimate_comparisons",
    "estimate_minwise",
    "falling_factorial_moment",
    "find_prime_in",
    "fit_scaling",
    "max_load",
    "run_setting1",
    "run_setting2",
    "tail_bound_check",
    "throw",
    "verify_exact_independence",
    "verify_moment_identity",
]
