"""Core mixture models over the Boolean cube and their exact operations.

A mixture of k product distributions is given by mixing weights pi (summing
to one) and an n x k marginals matrix m whose column j holds the Bernoulli
means of component j.  A subcube mixture restricts every marginal entry to
{0, 1/2, 1}; those values are all exactly representable in binary floating
point, so subcube moment arithmetic (sums of dyadic products) stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, ZeroProbabilityError
from .linalg import moment_rows
from .rng import generator

WEIGHT_TOL = 1e-9
SUBCUBE_VALUES = (0.0, 0.5, 1.0)


def canonical_subset(S) -> tuple[int, ...]:
    """Canonical (sorted, duplicate-free) coordinate subset."""
    out = tuple(sorted({int(i) for i in S}))
    if out and out[0] < 0:
        raise InvalidModelError(f"negative coordinate in subset {out}")
    return out


def _as_bits(x, n: int) -> np.ndarray:
    arr = np.asarray(x)
    if arr.shape != (n,):
        raise InvalidModelError(f"bit vector has shape {arr.shape}, expected ({n},)")
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidModelError("bit vector entries must be 0 or 1")
    return arr.astype(np.uint8)


@dataclass(frozen=True)
class ProductMixture:
    """Mixing weights plus marginals matrix; immutable after construction.

    weights: shape (k,), nonnegative, summing to 1 within 1e-9 (inputs outside
    the tolerance are rejected, never renormalized).
    marginals: shape (n, k) with entries in [0, 1].
    """

    weights: np.ndarray
    marginals: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).ravel()
        m = np.atleast_2d(np.asarray(self.marginals, dtype=float))
        if w.size < 1:
            raise InvalidModelError("mixture needs at least one component")
        if m.ndim != 2 or m.shape[1] != w.size:
            raise InvalidModelError(
                f"marginals shape {m.shape} incompatible with {w.size} weights"
            )
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(m)):
            raise InvalidModelError("non-finite model parameters")
        if np.any(w < -WEIGHT_TOL) or np.any(w > 1 + WEIGHT_TOL):
            raise InvalidModelError(f"weights out of [0,1]: {w}")
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise InvalidModelError(f"weights sum to {w.sum()!r}, not 1 within 1e-9")
        if np.any(m < -1e-12) or np.any(m > 1 + 1e-12):
            raise InvalidModelError("marginal entries out of [0,1]")
        w = np.clip(w, 0.0, 1.0)
        m = np.clip(m, 0.0, 1.0)
        w.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "marginals", m)

    @property
    def n(self) -> int:
        return self.marginals.shape[0]

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def moment(self, S) -> float:
        return exact_moment(self, S)


class SubcubeMixture(ProductMixture):
    """Product mixture whose marginal entries are exactly 0, 1/2 or 1."""

    def __post_init__(self) -> None:
        super().__post_init__()
        m = self.marginals
        if not np.all((m == 0.0) | (m == 0.5) | (m == 1.0)):
            raise InvalidModelError("subcube marginals must be exactly 0, 1/2 or 1")

    @property
    def codes(self) -> np.ndarray:
        """Two-bit integer codes: entry*2 in {0, 1, 2}."""
        return (self.marginals * 2).astype(np.int8)

    @classmethod
    def from_codes(cls, weights, codes) -> "SubcubeMixture":
        codes = np.asarray(codes)
        if not np.all((codes >= 0) & (codes <= 2)):
            raise InvalidModelError("subcube codes must be 0, 1 or 2")
        return cls(weights, codes.astype(float) / 2.0)


def sample(model: ProductMixture, seed: int, count: int) -> np.ndarray:
    """Draw ``count`` samples; returns a (count, n) uint8 array.

    Component j is selected with probability weights[j], then bit i is set
    independently with probability marginals[i, j].  Deterministic given seed.
    """
    if count < 1:
        raise InvalidModelError(f"count must be >= 1, got {count}")
    rng = generator(seed)
    cum = np.cumsum(model.weights)
    cum[-1] = 1.0
    comps = np.searchsorted(cum, rng.random(count), side="right")
    probs = model.marginals[:, comps].T  # (count, n)
    return (rng.random((count, model.n)) < probs).astype(np.uint8)


def pdf_exact(model: ProductMixture, x) -> float:
    """Density sum_j weights[j] prod_i (m[i,j] if x_i else 1 - m[i,j])."""
    bits = _as_bits(x, model.n)
    m = model.marginals
    per = np.where(bits[:, None] == 1, m, 1.0 - m)
    return float(model.weights @ np.prod(per, axis=0))


def exact_moment(model: ProductMixture, S) -> float:
    """E[x_S] = Pr[x_S = 1^|S|] = (entrywise product of rows S) . weights."""
    S = canonical_subset(S)
    if S and S[-1] >= model.n:
        raise InvalidModelError(f"subset {S} out of range for n={model.n}")
    row = moment_rows(model.marginals, [S])[0]
    return float(row @ model.weights)


def condition_on(model: ProductMixture, S, s) -> ProductMixture:
    """The conditional mixture (D | x_S = s) over the remaining coordinates.

    New weights are pi * prod_{i in S} gamma^i / Pr[x_S = s] with
    gamma^i = mu^i when s_i = 1 and 1 - mu^i when s_i = 0; marginal rows S are
    dropped.  Conditioning a SubcubeMixture yields a SubcubeMixture.
    """
    S = canonical_subset(S)
    bits = _as_bits(s, len(S))
    if S and S[-1] >= model.n:
        raise InvalidModelError(f"subset {S} out of range for n={model.n}")
    gamma = np.ones(model.k)
    for i, b in zip(S, bits):
        row = model.marginals[i]
        gamma = gamma * (row if b == 1 else 1.0 - row)
    total = float(model.weights @ gamma)
    if total <= 0.0:
        raise ZeroProbabilityError(f"event x_{S} = {bits.tolist()} has probability 0")
    new_w = model.weights * gamma / total
    keep = [i for i in range(model.n) if i not in S]
    new_m = model.marginals[keep]
    cls = SubcubeMixture if isinstance(model, SubcubeMixture) else ProductMixture
    return cls(new_w / new_w.sum(), new_m)


def _all_subsets_upto(n: int, degree: int):
    import itertools

    for size in range(0, min(degree, n) + 1):
        yield from itertools.combinations(range(n), size)


def collapse_rank(model: ProductMixture, degree_cap: int) -> ProductMixture:
    """Reduce the component count to the rank of the truncated moment matrix.

    Repeatedly finds a kernel vector v of the moment matrix truncated to rows
    of size <= degree_cap and walks the weights along pi + t v until the first
    coordinate hits zero, then drops zero-weight columns.  Moments up to
    degree_cap are preserved (asserted within 1e-9); full-rank input returns
    unchanged.
    """
    subsets = list(_all_subsets_upto(model.n, degree_cap))
    cls = SubcubeMixture if isinstance(model, SubcubeMixture) else ProductMixture
    w = model.weights.copy()
    m = model.marginals.copy()
    reference = moment_rows(model.marginals, subsets) @ model.weights

    while w.shape[0] > 1:
        M = moment_rows(m, subsets)
        _, sv, vt = np.linalg.svd(M, full_matrices=True)
        rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if sv.size else 1.0)))
        if rank >= w.shape[0]:
            break
        v = vt[-1]
        # Walk pi along +-v to the first vanishing coordinate.
        best_t = None
        for tv in (v, -v):
            pos = tv > 1e-15
            if not np.any(pos):
                continue
            t0 = float(np.min(w[pos] / tv[pos]))
            if best_t is None or t0 < best_t[0]:
                best_t = (t0, tv)
        if best_t is None:
            break
        t0, tv = best_t
        w = w - t0 * tv
        w[np.abs(w) < 1e-12] = 0.0
        keep = w > 0.0
        w = w[keep]
        m = m[:, keep]
        w = w / w.sum()

    out = cls(w, m)
    achieved = moment_rows(out.marginals, subsets) @ out.weights
    drift = float(np.max(np.abs(achieved - reference))) if subsets else 0.0
    if drift > 1e-9:
        raise InvalidModelError(f"collapse_rank drifted moments by {drift:.2e}")
    return out
