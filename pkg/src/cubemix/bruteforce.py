"""Brute-force ground-truth oracles: full probability tables and exact TVD.

Everything here enumerates all 2^n points, so calls are gated by a dimension
cap (default 20; 2^20 doubles fit comfortably in memory and keep tests fast).
"""

from __future__ import annotations

import numpy as np

from .errors import BruteForceCapError, InvalidModelError
from .models import ProductMixture

DEFAULT_CAP = 20


def all_points(n: int) -> np.ndarray:
    """All 2^n bit vectors as a (2^n, n) uint8 array, row index = binary code."""
    codes = np.arange(1 << n, dtype=np.uint32)
    return ((codes[:, None] >> np.arange(n, dtype=np.uint32)) & 1).astype(np.uint8)


def mixture_table(model: ProductMixture) -> np.ndarray:
    """Probability of every point of {0,1}^n under the mixture, vectorized."""
    n, k = model.n, model.k
    bits = all_points(n)
    table = np.ones(((1 << n), k))
    for i in range(n):
        row = model.marginals[i]
        table *= np.where(bits[:, i : i + 1] == 1, row, 1.0 - row)
    return table @ model.weights


def prob_table(dist, n: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Full probability table of a distribution-evaluable object.

    Accepts a ProductMixture, any object exposing ``pdf_table(n)`` or
    ``pdf(x)``, a callable on bit vectors, or a ready-made table.
    """
    if n > cap:
        raise BruteForceCapError(f"n={n} exceeds brute-force cap {cap}")
    if isinstance(dist, ProductMixture):
        if dist.n != n:
            raise InvalidModelError(f"model has n={dist.n}, requested {n}")
        return mixture_table(dist)
    if isinstance(dist, np.ndarray):
        if dist.shape != (1 << n,):
            raise InvalidModelError(f"table has shape {dist.shape}, expected ({1 << n},)")
        return dist.astype(float)
    if hasattr(dist, "pdf_table"):
        return np.asarray(dist.pdf_table(n), dtype=float)
    evaluate = dist.pdf if hasattr(dist, "pdf") else dist
    if not callable(evaluate):
        raise InvalidModelError(f"cannot evaluate distribution of type {type(dist)!r}")
    pts = all_points(n)
    return np.array([float(evaluate(pts[i])) for i in range(1 << n)])


def tvd_bruteforce(d1, d2, n: int, cap: int = DEFAULT_CAP) -> float:
    """Total variation distance (1/2) sum_x |d1(x) - d2(x)| by full enumeration."""
    t1 = prob_table(d1, n, cap=cap)
    t2 = prob_table(d2, n, cap=cap)
    return float(0.5 * np.abs(t1 - t2).sum())
