"""Dense small-matrix kernels: entrywise products, moment rows, box-constrained
L-infinity regression, sigma-infinity minimum, barycentric spanners, and the
alternating-binomial Vandermonde kernel.

The L-infinity problems are linear programs.  They are solved by an in-repo
two-phase dense simplex with Bland's anti-cycling rule, which is deterministic
and exact at the sizes this package produces (hundreds of rows, at most a
dozen columns).  The regression LP is solved through its dual, whose basis
size equals the number of regression variables plus one, so each pivot is a
cheap vectorized row operation no matter how many rows the instance has.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import LPError

_PIV_TOL = 1e-9
_COST_TOL = 1e-9
_MAX_ITER = 20_000


# ---------------------------------------------------------------------------
# Standard-form simplex: min c.x  s.t.  A x = b, x >= 0.
# ---------------------------------------------------------------------------


def _bland_phase(T: np.ndarray, basis: list[int], ncols: int, forbidden: int) -> None:
    """Run simplex pivots on tableau T in place until optimal (Bland's rule).

    ``ncols`` is the number of structural columns eligible to enter;
    columns >= ``forbidden`` (artificials) never enter.
    """
    for _ in range(_MAX_ITER):
        cost = T[-1, :ncols]
        entering = -1
        for j in range(min(ncols, forbidden)):
            if cost[j] < -_COST_TOL:
                entering = j
                break
        if entering < 0:
            return
        col = T[:-1, entering]
        rhs = T[:-1, -1]
        best_ratio = math.inf
        leaving = -1
        for i in range(col.shape[0]):
            if col[i] > _PIV_TOL:
                ratio = rhs[i] / col[i]
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise LPError("unbounded linear program")
        piv = T[leaving, entering]
        T[leaving] /= piv
        factors = T[:, entering].copy()
        factors[leaving] = 0.0
        T -= np.outer(factors, T[leaving])
        T[:, entering] = 0.0
        T[leaving, entering] = 1.0
        basis[leaving] = entering
    raise LPError("simplex iteration cap exceeded")


def simplex_standard(c: np.ndarray, A: np.ndarray, b: np.ndarray):
    """Solve min c.x s.t. A x = b, x >= 0. Returns (x, value, basis, rows_kept)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if m == 0:
        return np.zeros(n), 0.0, [], []
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1 tableau: [A | I | b] with artificial cost row.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _bland_phase(T, basis, n + m, forbidden=n)
    if T[-1, -1] < -1e-7:
        raise LPError("infeasible linear program")

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep = []
    for i in range(m):
        if basis[i] >= n:
            pivot_col = -1
            for j in range(n):
                if abs(T[i, j]) > _PIV_TOL:
                    pivot_col = j
                    break
            if pivot_col < 0:
                continue  # redundant constraint row
            piv = T[i, pivot_col]
            T[i] /= piv
            factors = T[:, pivot_col].copy()
            factors[i] = 0.0
            T -= np.outer(factors, T[i])
            T[:, pivot_col] = 0.0
            T[i, pivot_col] = 1.0
            basis[i] = pivot_col
        keep.append(i)

    rows = np.array(keep, dtype=int)
    T2 = np.zeros((len(rows) + 1, n + 1))
    T2[:-1, :n] = T[rows][:, :n]
    T2[:-1, -1] = T[rows][:, -1]
    basis2 = [basis[i] for i in keep]
    # Phase 2 reduced costs: c - c_B B^{-1} A.
    T2[-1, :n] = c
    for i, bi in enumerate(basis2):
        if c[bi] != 0.0:
            T2[-1] -= c[bi] * T2[i]
    _bland_phase(T2, basis2, n, forbidden=n)

    x = np.zeros(n)
    for i, bi in enumerate(basis2):
        x[bi] = T2[i, -1]
    return x, float(-T2[-1, -1]), basis2, keep


# ---------------------------------------------------------------------------
# Box-constrained L-infinity regression.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionResult:
    """Solution and achieved L-infinity residual of a regression problem."""

    solution: np.ndarray
    residual: float


def _box_arrays(box, r: int):
    if box is None:
        lo = np.full(r, -np.inf)
        hi = np.full(r, np.inf)
        return lo, hi
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (r,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (r,)).copy()
    if np.any(lo > hi):
        raise LPError(f"infeasible box: lo={lo}, hi={hi}")
    return lo, hi


def linf_regression(A: np.ndarray, b: np.ndarray, box=None) -> RegressionResult:
    """Minimize ||A x - b||_inf subject to lo <= x <= hi (componentwise).

    ``box`` is ``None`` for unconstrained x or a pair of per-coordinate bound
    vectors (scalars broadcast).  Solved exactly through the dual LP; ties are
    broken by Bland's pivot rule, so the result is deterministic.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, r = A.shape
    if m != b.shape[0]:
        raise LPError(f"row mismatch: A has {m} rows, b has {b.shape[0]}")
    lo, hi = _box_arrays(box, r)

    if m == 0 or r == 0:
        x = np.clip(np.zeros(r), lo, hi)
        resid = 0.0 if m == 0 else float(np.max(np.abs(b)))
        return RegressionResult(x, resid)

    g_idx = [j for j in range(r) if np.isfinite(hi[j])]
    h_idx = [j for j in range(r) if np.isfinite(lo[j])]
    n_z = 2 * m + len(g_idx) + len(h_idx)

    # Dual equalities: A^T p - A^T q + g - h = 0  and  sum(p) + sum(q) = 1.
    G = np.zeros((r + 1, n_z))
    G[:r, :m] = A.T
    G[:r, m : 2 * m] = -A.T
    for col, j in enumerate(g_idx):
        G[j, 2 * m + col] = 1.0
    for col, j in enumerate(h_idx):
        G[j, 2 * m + len(g_idx) + col] = -1.0
    G[r, : 2 * m] = 1.0
    d = np.zeros(r + 1)
    d[r] = 1.0
    cost = np.concatenate(
        [b, -b, hi[g_idx] if g_idx else np.zeros(0), -lo[h_idx] if h_idx else np.zeros(0)]
    )

    _, value, basis, _ = simplex_standard(cost, G, d)
    residual = max(value, 0.0)

    # Each basic dual variable marks a tight primal constraint; the primal
    # optimum (x, t) solves the square system of those rows.
    rows = []
    rhs = []
    for col in basis:
        if col < m:
            rows.append(np.concatenate([A[col], [-1.0]]))
            rhs.append(b[col])
        elif col < 2 * m:
            i = col - m
            rows.append(np.concatenate([-A[i], [-1.0]]))
            rhs.append(-b[i])
        elif col < 2 * m + len(g_idx):
            j = g_idx[col - 2 * m]
            e = np.zeros(r + 1)
            e[j] = 1.0
            rows.append(e)
            rhs.append(hi[j])
        else:
            j = h_idx[col - 2 * m - len(g_idx)]
            e = np.zeros(r + 1)
            e[j] = -1.0
            rows.append(e)
            rhs.append(-lo[j])
    M = np.asarray(rows)
    v = np.asarray(rhs)
    if M.shape[0] == r + 1:
        try:
            y = np.linalg.solve(M, v)
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(M, v, rcond=None)[0]
    else:
        y = np.linalg.lstsq(M, v, rcond=None)[0]
    x = np.clip(y[:r], lo, hi)
    achieved = float(np.max(np.abs(A @ x - b)))
    # Guard against a degenerate recovered point: trust the LP value.
    if achieved > residual + 1e-7:
        residual = achieved
    return RegressionResult(x, float(max(residual, 0.0) + 0.0))


def sigma_inf_min(A: np.ndarray) -> float:
    """min over ||x||_inf = 1 of ||A x||_inf, exactly via one LP per column.

    By sign symmetry it suffices to pin x_j = 1 for each column j, constrain
    the rest to [-1, 1], and take the minimum residual.
    """
    value, _ = sigma_inf_min_witness(A)
    return value


def sigma_inf_min_witness(A: np.ndarray) -> tuple[float, np.ndarray]:
    """sigma_inf_min together with a minimizing x of unit infinity norm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, r = A.shape
    if r < 1:
        raise LPError("sigma_inf_min needs at least one column")
    best = math.inf
    best_x = np.zeros(r)
    for j in range(r):
        rest = [c for c in range(r) if c != j]
        sub = A[:, rest]
        res = linf_regression(sub, -A[:, j], box=(-1.0, 1.0))
        if res.residual < best - 1e-15:
            best = res.residual
            x = np.empty(r)
            x[j] = 1.0
            for pos, c in enumerate(rest):
                x[c] = res.solution[pos]
            best_x = x
    return float(best), best_x


# ---------------------------------------------------------------------------
# Entrywise products and moment rows.
# ---------------------------------------------------------------------------


def entrywise_product(vectors, length: int | None = None) -> np.ndarray:
    """Coordinatewise product of a collection of equal-length vectors.

    The empty product is the all-ones vector, whose length must then be given
    explicitly via ``length``.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if not vecs:
        if length is None:
            raise LPError("empty entrywise product needs an explicit length")
        return np.ones(length)
    k = vecs[0].shape[0]
    out = np.ones(k)
    for v in vecs:
        if v.shape != (k,):
            raise LPError(f"length mismatch in entrywise product: {v.shape} vs ({k},)")
        out = out * v
    return out


def moment_rows(marginals: np.ndarray, subsets) -> np.ndarray:
    """Stack the rows of the moment matrix indexed by ``subsets``.

    Row for S is the entrywise product of the marginal rows in S; the empty
    set gives the all-ones row.
    """
    m = np.atleast_2d(np.asarray(marginals, dtype=float))
    k = m.shape[1]
    rows = np.ones((len(subsets), k))
    for idx, S in enumerate(subsets):
        for i in S:
            rows[idx] *= m[i]
    return rows


# ---------------------------------------------------------------------------
# Barycentric spanner.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpannerResult:
    indices: tuple[int, ...]
    coefficients: np.ndarray  # shape (n, len(indices)), entries in [-1, 1]


def _independent_subset(V: np.ndarray, tol: float = 1e-9) -> list[int]:
    """Maximal independent subset, lowest-index preference, partial pivoting."""
    chosen: list[int] = []
    pivots: list[np.ndarray] = []
    for idx in range(V.shape[0]):
        v = V[idx].astype(float).copy()
        for p in pivots:
            j = int(np.argmax(np.abs(p)))
            v -= (v[j] / p[j]) * p
        if np.max(np.abs(v)) > tol:
            chosen.append(idx)
            pivots.append(v)
    return chosen


def barycentric_spanner(vectors, max_exhaustive: int = 10_000) -> SpannerResult:
    """Subset of vectors expressing all others with coefficients in [-1, 1].

    The spanner is computed on a maximal independent subset of the input
    (rank-deficient collections are padded deterministically).  Subset search
    is exhaustive while the number of determinant evaluations stays under
    ``max_exhaustive``; beyond that, the determinant-exchange procedure is
    used.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = V.shape[0]
    if n == 0:
        raise LPError("barycentric spanner of an empty collection")
    indep = _independent_subset(V)
    rho = len(indep)
    if rho == 0:
        # All vectors are (numerically) zero: any single index spans.
        coeffs = np.ones((n, 1))
        return SpannerResult((0,), coeffs)
    # Orthonormal coordinates for the row space, from the independent subset.
    Q, _ = np.linalg.qr(V[indep].T)
    coords = V @ Q[:, :rho]

    def detval(subset) -> float:
        return abs(float(np.linalg.det(coords[list(subset)])))

    if math.comb(n, rho) <= max_exhaustive:
        best_subset = None
        best_det = -1.0
        for subset in itertools.combinations(range(n), rho):
            d = detval(subset)
            if d > best_det * (1.0 + 1e-12) and d > best_det + 1e-15:
                best_det = d
                best_subset = subset
        chosen = list(best_subset)
    else:
        chosen = list(indep)
        current = detval(chosen)
        improved = True
        while improved:
            improved = False
            for i in range(n):
                if i in chosen:
                    continue
                for slot in range(rho):
                    trial = chosen.copy()
                    trial[slot] = i
                    d = detval(trial)
                    if d > current * (1.0 + 1e-9):
                        chosen = sorted(trial)
                        current = detval(chosen)
                        improved = True
                        break
                if improved:
                    break

    chosen = sorted(chosen)
    B = V[chosen].T  # (k, rho)
    coeffs = np.zeros((n, rho))
    for i in range(n):
        res = linf_regression(B, V[i], box=(-1.0, 1.0))
        if res.residual > 1e-6:
            raise LPError(
                f"spanner coefficients for vector {i} have residual {res.residual:.2e}"
            )
        coeffs[i] = res.solution
    return SpannerResult(tuple(chosen), coeffs)


def vandermonde_kernel(m: int) -> np.ndarray:
    """The vector v_i = (-1)^i C(m, i), i = 1..m.

    It spans the right kernel of the Vandermonde matrix with rows
    (lam, 2 lam, ..., m lam)^d for d = 1..m-1.
    """
    if m < 1:
        raise LPError(f"vandermonde_kernel needs m >= 1, got {m}")
    return np.array([(-1) ** i * math.comb(m, i) for i in range(1, m + 1)], dtype=np.int64)
