"""scikit-learn style transformers over the hash families.

>>> PolynomialHasher(k=4, n_buckets=16, random_state=3).fit_transform([[0, 1], [2, 3]]).shape
(2, 2)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ConfigError
from .families import FullRandom, Polynomial
from .field import MERSENNE61
from .rng import derive, experiment_key


def _seed_key(random_state) -> int:
    if random_state is None:
        return experiment_key(0, "hasher")
    if isinstance(random_state, (int, np.integer)):
        return derive(int(random_state) & ((1 << 64) - 1), 0)
    raise ConfigError("random_state must be an int or None")


class _BaseHasher(TransformerMixin, BaseEstimator):
    """Hash every entry of an integer matrix.

    With ``n_buckets`` set the output is bucket ids in ``[n_buckets)``,
    otherwise unit-interval floats.  Fitting only fixes the hash function.
    """

    def _family(self):
        raise NotImplementedError

    def fit(self, X, y=None):
        self._validate(X)
        fam = self._family()
        if self.n_buckets is not None:
            fam.check_range(int(self.n_buckets))
        self.family_ = fam
        self.key_ = _seed_key(self.random_state)
        return self

    def _validate(self, X):
        X = check_array(X, dtype=np.int64, ensure_min_samples=1)
        if X.size and X.min() < 0:
            raise ValueError("keys must be non-negative integers")
        return X

    def transform(self, X):
        check_is_fitted(self, "key_")
        X = self._validate(X)
        flat = X.ravel()
        if self.n_buckets is None:
            out = self.family_.unit_values(self.key_, flat).astype(np.float64) / self.family_.unit_denominator
        else:
            out = self.family_.range_values(self.key_, flat, int(self.n_buckets))
        return out.reshape(X.shape)


class PolynomialHasher(_BaseHasher):
    def __init__(self, k=2, n_buckets=None, prime=MERSENNE61, random_state=None):
        self.k = k
        self.n_buckets = n_buckets
        self.prime = prime
        self.random_state = random_state

    def _family(self):
        return Polynomial(int(self.k), int(self.prime))


class FullRandomHasher(_BaseHasher):
    def __init__(self, n_buckets=None, random_state=None):
        self.n_buckets = n_buckets
        self.random_state = random_state

    def _family(self):
        return FullRandom()
