"""The general product-mixture learner.

Instead of guessing all n x k marginal entries, the learner guesses a
barycentric-spanner row set J (at most k coordinates), learns bounded
coefficients expressing every other row as a combination of rows J by
L-infinity regression on accessible cross-check columns, and grids only the
|J| x k spanner entries and the mixing weights.  When the restricted moment
matrix is ill-conditioned the mixture collapses to fewer components after
conditioning, which the recursive driver exploits through the returned
condition sets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, LearnConfig, subset_budget_degree
from .errors import InvalidModelError, NotIllConditionedError
from .linalg import linf_regression, moment_rows, sigma_inf_min_witness
from .models import ProductMixture
from .oracles import MomentOracle
from .subcube import FailOutcome


@dataclass(frozen=True)
class GridSpec:
    """Grid granularities for spanner entries and mixing weights."""

    entry_step: float
    weight_step: float

    def __post_init__(self) -> None:
        for name, value in (("entry_step", self.entry_step), ("weight_step", self.weight_step)):
            if not (0.0 < value <= 1.0):
                raise InvalidModelError(f"{name} must be in (0, 1], got {value}")

    @classmethod
    def defaults(cls, epsilon: float, k: int, n: int) -> "GridSpec":
        """The analysis granularities: entries eps/(8 k^2 n), weights 2 eps/(3 k^2)."""
        return cls(
            entry_step=max(epsilon / (8.0 * k * k * max(n, 1)), 1e-6),
            weight_step=max(2.0 * epsilon / (3.0 * k * k), 1e-6),
        )

    def entry_values(self) -> np.ndarray:
        vals = np.arange(0.0, 1.0, self.entry_step)
        return np.unique(np.append(vals, 1.0))

    def weight_values(self) -> np.ndarray:
        vals = np.arange(0.0, 1.0, self.weight_step)
        return np.unique(np.append(vals, 1.0))


@dataclass(frozen=True)
class CandidateList:
    """Output of the non-recursive product learner."""

    mixtures: tuple[ProductMixture, ...]
    condition_sets: tuple[tuple[int, ...], ...]
    enumerated: int  # grid count before deduplication / capping
    truncated: bool = False

    def __post_init__(self) -> None:
        for W in self.condition_sets:
            if len(W) == 0:
                raise InvalidModelError("empty condition set")


@dataclass(frozen=True)
class CoefficientFit:
    coefficients: np.ndarray  # in [-1, 1]^|J|
    residual: float


def learn_coefficients(
    oracle: MomentOracle,
    J,
    i: int,
    degree_cap: int | None = None,
    config: LearnConfig = DEFAULT_CONFIG,
) -> CoefficientFit:
    """Coefficients expressing marginal row i as a combination of rows J.

    Regresses the accessible cross-check column of {i} on the columns of
    {i_1}, ..., {i_r} over rows R-dagger (subsets of the complement of size at
    most s(|J| - 1)), with the box [-1, 1]^r.  A large residual signals the
    caller's ill-conditioning branch; it is reported, not raised.
    """
    J = tuple(sorted(int(j) for j in set(J)))
    i = int(i)
    if i in J:
        raise InvalidModelError(f"coordinate {i} is in J={J}")
    r = len(J)
    cap = degree_cap if degree_cap is not None else subset_budget_degree(max(r - 1, 0))
    blocked = set(J) | {i}
    free = [c for c in range(oracle.n) if c not in blocked]
    rows: list[tuple[int, ...]] = []
    for size in range(0, min(cap, len(free)) + 1):
        for S in itertools.combinations(free, size):
            rows.append(S)
            if len(rows) >= config.max_regression_rows:
                break
        if len(rows) >= config.max_regression_rows:
            break
    E = np.empty((len(rows), r))
    b = np.empty(len(rows))
    for ri, S in enumerate(rows):
        for cj, j in enumerate(J):
            E[ri, cj] = oracle.moment(S + (j,))
        b[ri] = oracle.moment(S + (i,))
    res = linf_regression(E, b, box=(-1.0, 1.0))
    return CoefficientFit(coefficients=res.solution, residual=res.residual)


def _weight_tuples(k: int, values: np.ndarray):
    """Gridded weight vectors: k-1 free entries, last = 1 - rest (if >= 0)."""
    if k == 1:
        yield np.array([1.0])
        return
    for combo in itertools.product(values, repeat=k - 1):
        rest = 1.0 - sum(combo)
        if rest < -1e-12:
            continue
        yield np.array(list(combo) + [max(rest, 0.0)])


def iter_candidate_params(
    oracle: MomentOracle,
    k: int,
    grid: GridSpec,
    config: LearnConfig = DEFAULT_CONFIG,
):
    """Yield (weights, marginals) for every spanner guess and grid point.

    Enumeration order: spanner size ascending, spanner lexicographic, entry
    grid odometer, weight grid odometer.  This is the full candidate
    enumeration behind :func:`nondegenerate_learn_products`; it is exposed
    separately so callers can stream it without materializing the list.
    """
    if k < 1:
        raise InvalidModelError("iter_candidate_params needs k >= 1")
    n = oracle.n
    entry_vals = grid.entry_values()
    weight_list = list(_weight_tuples(k, grid.weight_values()))
    for r in range(1, min(k, n) + 1):
        for J in itertools.combinations(range(n), r):
            outside = [i for i in range(n) if i not in J]
            alphas = {
                i: learn_coefficients(oracle, J, i, config=config).coefficients
                for i in outside
            }
            for flat in itertools.product(entry_vals, repeat=r * k):
                m_J = np.array(flat, dtype=float).reshape(r, k)
                marginals = np.empty((n, k))
                for idx, j in enumerate(J):
                    marginals[j] = m_J[idx]
                for i in outside:
                    marginals[i] = np.clip(alphas[i] @ m_J, 0.0, 1.0)
                for weights in weight_list:
                    yield weights, marginals


def nondegenerate_learn_products(
    oracle: MomentOracle,
    k: int,
    grid: GridSpec,
    config: LearnConfig = DEFAULT_CONFIG,
) -> CandidateList | FailOutcome:
    """One non-recursive pass: a candidate list plus the conditioning sets.

    Under the non-degeneracy hypothesis (restricted moment matrices have
    sigma-infinity-min above the conditioning gate), some listed mixture is
    close to the target in total variation.  For k > 1 the output always also
    carries every W of size at most k + 1 as a condition-set candidate.
    Candidates are deduplicated exactly and capped at config.max_candidates.
    """
    if k <= 0:
        return FailOutcome(reason="counter exhausted")
    n = oracle.n
    mixtures: list[ProductMixture] = []
    seen: set[bytes] = set()
    enumerated = 0
    truncated = False
    for weights, marginals in iter_candidate_params(oracle, k, grid, config):
        enumerated += 1
        if len(mixtures) >= config.max_candidates:
            truncated = True
            continue
        key = weights.tobytes() + marginals.tobytes()
        if key in seen:
            continue
        seen.add(key)
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-9:
            weights = weights / total
        mixtures.append(ProductMixture(weights, marginals))
    condition_sets: tuple[tuple[int, ...], ...] = ()
    if k > 1:
        condition_sets = tuple(
            S
            for size in range(1, min(k + 1, n) + 1)
            for S in itertools.combinations(range(n), size)
        )
    return CandidateList(
        mixtures=tuple(mixtures),
        condition_sets=condition_sets,
        enumerated=enumerated,
        truncated=truncated,
    )


def minimum_tvd_over_candidates(
    oracle: MomentOracle,
    k: int,
    grid: GridSpec,
    reference_table: np.ndarray,
    config: LearnConfig = DEFAULT_CONFIG,
    batch: int = 4096,
) -> tuple[float, ProductMixture]:
    """Exact minimum brute-force TVD between the candidate enumeration and a
    reference table, without materializing the list.

    Traverses exactly the candidates of :func:`iter_candidate_params` (same
    grids, same coefficient fits, same clipping), evaluating probability
    tables in vectorized batches.  Returns the minimum TVD and one witness.
    """
    if k < 1:
        raise InvalidModelError("needs k >= 1")
    n = oracle.n
    size = 1 << n
    if reference_table.shape != (size,):
        raise InvalidModelError("reference table has wrong length")
    from .bruteforce import all_points

    bits = all_points(n).astype(bool)  # (size, n)
    entry_vals = grid.entry_values()
    weight_mat = np.array(list(_weight_tuples(k, grid.weight_values())))  # (W, k)
    best = math.inf
    best_params: tuple[np.ndarray, np.ndarray] | None = None

    for r in range(1, min(k, n) + 1):
        for J in itertools.combinations(range(n), r):
            outside = [i for i in range(n) if i not in J]
            alpha = np.stack(
                [
                    learn_coefficients(oracle, J, i, config=config).coefficients
                    for i in outside
                ]
            ) if outside else np.zeros((0, r))
            grids = itertools.product(entry_vals, repeat=r * k)
            while True:
                chunk = list(itertools.islice(grids, batch))
                if not chunk:
                    break
                m_J = np.asarray(chunk, dtype=float).reshape(len(chunk), r, k)
                m_out = np.clip(np.einsum("or,grk->gok", alpha, m_J), 0.0, 1.0)
                marg = np.empty((len(chunk), n, k))
                marg[:, list(J), :] = m_J
                if outside:
                    marg[:, outside, :] = m_out
                # Component tables: prod over coordinates of m or 1-m.
                comp = np.ones((len(chunk), size, k))
                for i in range(n):
                    mi = marg[:, i, :][:, None, :]  # (g, 1, k)
                    comp *= np.where(bits[None, :, i, None], mi, 1.0 - mi)
                tables = comp @ weight_mat.T  # (g, size, W)
                tvds = 0.5 * np.abs(tables - reference_table[None, :, None]).sum(axis=1)
                g_idx, w_idx = np.unravel_index(np.argmin(tvds), tvds.shape)
                if tvds[g_idx, w_idx] < best:
                    best = float(tvds[g_idx, w_idx])
                    best_params = (weight_mat[w_idx].copy(), marg[g_idx].copy())
    assert best_params is not None
    w, m = best_params
    return best, ProductMixture(w / w.sum(), m)


def closed_form_grid_count(n: int, k: int, grid: GridSpec) -> int:
    """Exact size of the candidate enumeration before deduplication."""
    entry = grid.entry_values().shape[0]
    weights = sum(1 for _ in _weight_tuples(k, grid.weight_values()))
    total = 0
    for r in range(1, min(k, n) + 1):
        total += math.comb(n, r) * entry ** (r * k) * weights
    return total


def collapse_ill_conditioned(
    model: ProductMixture,
    eta: float,
    degree: int | None = None,
    config: LearnConfig = DEFAULT_CONFIG,
) -> ProductMixture:
    """Drop one component of an ill-conditioned mixture, preserving moments.

    Requires sigma_inf_min of the degree-capped moment matrix to be at most
    eta * sqrt(2) / (3 k^2) (raises NotIllConditionedError otherwise).  The
    weight vector walks along the rescaled minimal direction to the nearest
    zero; all moments of degree <= cap move by at most eta (verified).
    """
    k = model.k
    if k < 2:
        raise NotIllConditionedError("nothing to collapse for k < 2")
    cap = degree if degree is not None else k
    rows: list[tuple[int, ...]] = []
    for size in range(0, min(cap, model.n) + 1):
        for S in itertools.combinations(range(model.n), size):
            rows.append(S)
            if len(rows) >= config.max_regression_rows:
                break
        if len(rows) >= config.max_regression_rows:
            break
    M = moment_rows(model.marginals, rows)
    sigma, v = sigma_inf_min_witness(M)
    gate = eta * math.sqrt(2.0) / (3.0 * k * k)
    if sigma > gate:
        raise NotIllConditionedError(
            f"sigma_inf_min = {sigma:.3e} exceeds the gate {gate:.3e}; do not collapse"
        )
    z_plus = float(v[v > 0].sum())
    z_minus = float(-v[v < 0].sum())
    if z_plus < 1e-12 or z_minus < 1e-12:
        raise NotIllConditionedError("minimal direction is one-sided; cannot rebalance")
    v_star = np.where(v > 0, v / z_plus, v / z_minus)
    v_star[v == 0] = 0.0

    pi = model.weights
    uppers = [pi[i] / v_star[i] for i in range(k) if v_star[i] > 1e-15]
    lowers = [pi[i] / v_star[i] for i in range(k) if v_star[i] < -1e-15]
    t_plus = min(uppers) if uppers else math.inf
    t_minus = max(lowers) if lowers else -math.inf
    t = t_plus if abs(t_plus) <= abs(t_minus) else t_minus
    if not math.isfinite(t):
        raise NotIllConditionedError("no boundary crossing along the minimal direction")
    if abs(t) > k / math.sqrt(2.0) + 1e-9:
        raise NotIllConditionedError(f"walk length |t| = {abs(t):.3f} exceeds k/sqrt(2)")

    new_w = pi - t * v_star
    new_w[np.abs(new_w) < 1e-12] = 0.0
    keep = new_w > 0.0
    if keep.sum() >= k:
        drop = int(np.argmin(new_w))
        keep = np.ones(k, dtype=bool)
        keep[drop] = False
    new_w = new_w[keep]
    out = ProductMixture(new_w / new_w.sum(), model.marginals[:, keep])

    before = M @ model.weights
    after = moment_rows(out.marginals, rows) @ out.weights
    drift = float(np.max(np.abs(before - after)))
    if drift > eta * 1.01 + 1e-12:
        raise NotIllConditionedError(
            f"moment drift {drift:.3e} exceeds the requested eta {eta:.3e}"
        )
    return out
