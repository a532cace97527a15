"""Moment oracles: a uniform interface answering E[x_S] queries.

The exact oracle evaluates the model in closed form (tolerance 0).  The
empirical oracle averages a sample multiset; its declared tolerance comes
from inverting the standard N = (3 / eps^2) ln(2 / rho) sample bound at the
confidence chosen on construction.  Queries are cached, and samples are held
as packed 64-bit masks so one moment costs a single vectorized pass.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InsufficientSamplesError, InvalidModelError
from .models import ProductMixture, canonical_subset, exact_moment


class MomentOracle:
    """Interface: fields n, tolerance; method moment(S) -> float."""

    n: int
    tolerance: float

    def moment(self, S) -> float:  # pragma: no cover - interface
        raise NotImplementedError


class ExactOracle(MomentOracle):
    """Closed-form moments of a known model; tolerance 0."""

    def __init__(self, model: ProductMixture):
        self.model = model
        self.n = model.n
        self.tolerance = 0.0
        self._cache: dict[tuple[int, ...], float] = {}

    def moment(self, S) -> float:
        key = canonical_subset(S)
        hit = self._cache.get(key)
        if hit is None:
            hit = exact_moment(self.model, key)
            self._cache[key] = hit
        return hit


def fact_tolerance(count: int, confidence: float) -> float:
    """Additive error eps with N = (3/eps^2) ln(2/rho) at N=count, rho=confidence."""
    if count < 1:
        raise InsufficientSamplesError("tolerance of an empty sample multiset")
    return math.sqrt(3.0 * math.log(2.0 / confidence) / count)


class EmpiricalOracle(MomentOracle):
    """Plug-in moments of a sample multiset with a declared additive tolerance."""

    def __init__(self, samples: np.ndarray, tolerance: float | None = None,
                 confidence: float = 0.02):
        samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
        if samples.size == 0 or samples.shape[0] == 0:
            raise InsufficientSamplesError("empirical oracle needs at least one sample")
        if not np.all((samples == 0) | (samples == 1)):
            raise InvalidModelError("samples must be 0/1 valued")
        self.samples = samples
        self.count = samples.shape[0]
        self.n = samples.shape[1]
        self.tolerance = (
            fact_tolerance(self.count, confidence) if tolerance is None else float(tolerance)
        )
        self._cache: dict[tuple[int, ...], float] = {}
        if self.n <= 64:
            weights = (np.uint64(1) << np.arange(self.n, dtype=np.uint64))
            self._masks = (samples.astype(np.uint64) * weights).sum(axis=1)
        else:
            self._masks = None

    def moment(self, S) -> float:
        key = canonical_subset(S)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if key and key[-1] >= self.n:
            raise InvalidModelError(f"subset {key} out of range for n={self.n}")
        if not key:
            value = 1.0
        elif self._masks is not None:
            smask = np.uint64(0)
            for i in key:
                smask |= np.uint64(1) << np.uint64(i)
            value = float(np.count_nonzero((self._masks & smask) == smask) / self.count)
        else:
            value = float(np.all(self.samples[:, list(key)] == 1, axis=1).mean())
        self._cache[key] = value
        return value


def empirical_moment(oracle: EmpiricalOracle, S) -> float:
    """Fraction of oracle samples with x_S = 1^|S| (errors on empty multisets)."""
    if not isinstance(oracle, EmpiricalOracle):
        raise InvalidModelError("empirical_moment needs an empirical oracle")
    return oracle.moment(S)
