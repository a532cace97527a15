"""Moment-matching hard instances: mixtures over {0,1}^m that agree with the
uniform distribution on every moment of degree below m but differ on the top
moment, plus their embeddings into {0,1}^n and closed-form statistics.

The construction concatenates a superorthogonal family (an equal-rows block
alongside lower-triangular blocks whose row products telescope to zero sums)
with one extra solved row built from the alternating-binomial Vandermonde
kernel, shifts everything by 1/2, and mixes with uniform weights 1/m^2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bruteforce import all_points, prob_table, tvd_bruteforce
from .errors import CubemixError, InvalidModelError
from .linalg import entrywise_product, vandermonde_kernel
from .models import ProductMixture, exact_moment, pdf_exact


class ConstructionError(CubemixError):
    """The hard-instance construction is unavailable for these parameters."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for q in range(2, int(math.isqrt(p)) + 1):
        if p % q == 0:
            return False
    return True


def build_superortho_matrix(ell: int, xs) -> np.ndarray:
    """The ell x (ell+1)^2 family (a || b_1 || ... || b_{ell+1}).

    Block a repeats (x_1, ..., x_{ell+1}) in every row; block b_i is lower
    triangular with x_i below the diagonal and -j*x_i at diagonal position j.
    Every entrywise product of at most ell rows has coordinates summing to
    zero: the a-block sums to sum_i x_i^{|S|} and each b-block to -x_i^{|S|}.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if ell < 1:
        raise ConstructionError(f"ell must be >= 1, got {ell}")
    if xs.shape[0] != ell + 1:
        raise ConstructionError(f"need {ell + 1} scalars, got {xs.shape[0]}")
    if len(set(xs.tolist())) != xs.shape[0]:
        raise ConstructionError("scalars must be distinct")
    blocks = [np.tile(xs, (ell, 1))]
    for i in range(ell + 1):
        b = np.zeros((ell, ell))
        for j in range(ell):
            b[j, :j] = xs[i]
            b[j, j] = -(j + 1) * xs[i]
        blocks.append(b)
    return np.hstack(blocks)


def verify_superorthogonal(rows: np.ndarray, weights, d: int, tol: float = 1e-10) -> bool:
    """True iff every entrywise product of 1..d rows is orthogonal to weights."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    weights = np.asarray(weights, dtype=float).ravel()
    m = rows.shape[0]
    for size in range(1, min(d, m) + 1):
        for S in itertools.combinations(range(m), size):
            prod = entrywise_product([rows[i] for i in S])
            if abs(float(prod @ weights)) > tol:
                return False
    return True


@dataclass(frozen=True)
class MomentMatchInstance:
    """The hard instance: mixture A of m^2 product distributions on {0,1}^m."""

    m: int
    mixture: ProductMixture
    delta: float
    lambda1: float
    xs: np.ndarray

    @property
    def k(self) -> int:
        return self.m * self.m


def build_instance(m: int) -> MomentMatchInstance:
    """Construct the canonical moment-matching instance of dimension m.

    Requires m >= 3 and m + 1 prime (the alternating binomial power sum is
    then nonzero mod m + 1, which certifies |delta| >= (2m)^{-2m}).

    The appended top row places +lambda1 * v_i * x_i and -lambda1 * v_i * x_i
    in the first two positions of block i, where v = vandermonde_kernel(m)
    and lambda1 = m^2 / 2^m.  With x_i = i / (2 m^2) this keeps all entries
    in [-1/2, 1/2] for the supported m and evaluates to
    delta = -(lambda1 / m^2) * sum_i v_i x_i^m = -(2m)^{-2m} sum_i (-1)^i C(m,i) i^m.
    """
    if m < 3:
        raise ConstructionError(f"m must be >= 3, got {m} (m=2 collapses the top row)")
    if not _is_prime(m + 1):
        raise ConstructionError(f"m + 1 = {m + 1} must be prime")
    k = m * m
    xs = np.array([(i + 1) / (2.0 * m * m) for i in range(m)])
    ell = m - 1
    E = build_superortho_matrix(ell, xs)
    v = vandermonde_kernel(m).astype(float)
    lambda1 = (m * m) / 2.0**m
    top = np.zeros(k)
    for i in range(m):
        base = m + i * ell
        top[base] = lambda1 * v[i] * xs[i]
        top[base + 1] = -lambda1 * v[i] * xs[i]
    shifted = np.vstack([E, top])
    if np.abs(shifted).max() > 0.5 + 1e-12:
        raise ConstructionError(
            f"entries leave [-1/2, 1/2] at m={m}: max {np.abs(shifted).max():.4f}"
        )
    marginals = shifted + 0.5
    weights = np.full(k, 1.0 / k)
    mixture = ProductMixture(weights, marginals)

    # Invariants checked before returning the instance.
    for size in range(1, m):
        for S in itertools.combinations(range(m), size):
            mom = exact_moment(mixture, S)
            if abs(mom - 2.0**-size) > 1e-12:
                raise ConstructionError(
                    f"degree-{size} moment {S} is {mom!r}, expected 2^-{size}"
                )
    delta = exact_moment(mixture, tuple(range(m))) - 2.0**-m
    closed = -(lambda1 / k) * float(v @ xs**m)
    if abs(delta - closed) > 1e-12:
        raise ConstructionError(f"delta {delta!r} disagrees with closed form {closed!r}")
    if abs(delta) < (2 * m) ** (-2.0 * m) * (1 - 1e-9):
        raise ConstructionError(f"|delta| = {abs(delta):.3e} below (2m)^(-2m)")
    top_pairing = float(
        (top / k) @ entrywise_product([E[i] for i in range(ell)], length=k)
    )
    if abs(top_pairing) < (2 * m) ** (-2.0 * m) * (1 - 1e-9):
        raise ConstructionError("top-degree pairing vanishes")
    z = (all_points(m) == 0).sum(axis=1)
    table = prob_table(mixture, m)
    predicted = 2.0**-m + np.where(z % 2 == 0, delta, -delta)
    if np.max(np.abs(table - predicted)) > 1e-12:
        raise ConstructionError("pointwise density law 2^-m + (-1)^z(x) delta fails")
    return MomentMatchInstance(m=m, mixture=mixture, delta=float(delta),
                               lambda1=lambda1, xs=xs)


def embed_instance(inst: MomentMatchInstance, n: int, I) -> ProductMixture:
    """The product distribution A x U restricted to coordinates I.

    Marginal rows I carry A's rows (sorted(I)[j] gets A's row j); every other
    coordinate is uniform.  Weights are A's.
    """
    I = tuple(sorted(int(i) for i in I))
    if len(set(I)) != inst.m:
        raise InvalidModelError(f"I must have {inst.m} distinct coordinates, got {I}")
    if n < inst.m or (I and (I[0] < 0 or I[-1] >= n)):
        raise InvalidModelError(f"I={I} does not fit in dimension n={n}")
    marginals = np.full((n, inst.k), 0.5)
    for j, coord in enumerate(I):
        marginals[coord] = inst.mixture.marginals[j]
    return ProductMixture(inst.mixture.weights, marginals)


@dataclass(frozen=True)
class InstanceStats:
    chi_pair: float
    chi_sq: float
    tvd: float


def instance_stats(inst: MomentMatchInstance, n: int, I, J, cap: int = 20) -> InstanceStats:
    """Enumerated pairwise correlation, chi^2 and TVD of two embeddings.

    Asserts the closed forms chi_U(D_I, D_J) = 0, chi^2(D_I, U) = delta^2 4^m
    and tvd(D_I, D_J) = |delta| 2^{m-1} within 1e-9 before returning.
    """
    I = tuple(sorted(int(i) for i in I))
    J = tuple(sorted(int(j) for j in J))
    if I == J:
        raise InvalidModelError("instance_stats needs distinct embeddings I != J")
    d_i = embed_instance(inst, n, I)
    d_j = embed_instance(inst, n, J)
    t_i = prob_table(d_i, n, cap=cap)
    t_j = prob_table(d_j, n, cap=cap)
    u = 2.0**-n
    chi_pair = float((t_i * t_j / u).sum() - 1.0)
    chi_sq = float((t_i * t_i / u).sum() - 1.0)
    tvd = tvd_bruteforce(d_i, d_j, n, cap=cap)
    m, delta = inst.m, inst.delta
    checks = (
        (chi_pair, 0.0, "chi_U(D_I, D_J)"),
        (chi_sq, delta**2 * 4.0**m, "chi^2(D_I, U)"),
        (tvd, abs(delta) * 2.0 ** (m - 1), "tvd(D_I, D_J)"),
    )
    for got, want, name in checks:
        if abs(got - want) > 1e-9:
            raise ConstructionError(f"{name} = {got!r}, closed form {want!r}")
    return InstanceStats(chi_pair=chi_pair, chi_sq=chi_sq, tvd=tvd)


def density(inst: MomentMatchInstance, x) -> float:
    """A(x) for x in {0,1}^m."""
    return pdf_exact(inst.mixture, x)
