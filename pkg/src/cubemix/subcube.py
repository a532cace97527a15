"""The mixture-of-subcubes learner.

Pipeline: InSpan tests linear dependence of accessible cross-check columns by
L-infinity regression; GrowByOne greedily assembles a certified-full-rank,
locally-maximal collection of column indices; the main learner sweeps weight
windows, enumerates {0, 1/2, 1} guesses for the basis rows, solves for mixing
weights and the remaining rows, and accepts the first candidate whose
low-degree moments all match the oracle.  Failed candidates contribute
condition-set witnesses for the recursive driver.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, LearnConfig, moment_degree_cap
from .errors import InvalidModelError
from .linalg import linf_regression, moment_rows
from .models import SubcubeMixture, canonical_subset
from .oracles import MomentOracle

SUBCUBE_GRID = (0.5, 1.0, 0.0)  # odometer digit order: uniform-ish guesses first


@dataclass(frozen=True)
class BasisState:
    """Ordered collection B = {T_1, ..., T_r} with its union J."""

    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.sets or self.sets[0] != ():
            raise InvalidModelError("basis must start with the empty set")
        object.__setattr__(self, "sets", tuple(canonical_subset(T) for T in self.sets))

    @property
    def union(self) -> tuple[int, ...]:
        out: set[int] = set()
        for T in self.sets:
            out.update(T)
        return tuple(sorted(out))

    @property
    def r(self) -> int:
        return len(self.sets)


@dataclass(frozen=True)
class WeightWindow:
    tau_small: float
    tau_big: float

    def __post_init__(self) -> None:
        if not (0.0 < self.tau_small < self.tau_big <= 1.0):
            raise InvalidModelError(
                f"window must satisfy 0 < small < big <= 1, got {self}"
            )


@dataclass(frozen=True)
class MixtureOutcome:
    mixture: SubcubeMixture


@dataclass(frozen=True)
class ConditionSetsOutcome:
    sets: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not self.sets:
            raise InvalidModelError("condition-set outcome must be nonempty")


@dataclass(frozen=True)
class FailOutcome:
    reason: str = ""


LearnOutcome = MixtureOutcome | ConditionSetsOutcome | FailOutcome


@dataclass(frozen=True)
class GrowFailure:
    """GrowByOne could not certify a full basis; condition on J."""

    union: tuple[int, ...]


def _row_subsets(free: tuple[int, ...], degree: int, budget: int):
    """Subsets of ``free`` of size < degree, ascending size then lex, capped."""
    rows = []
    for size in range(0, min(degree - 1, len(free)) + 1):
        for S in itertools.combinations(free, size):
            rows.append(S)
            if len(rows) >= budget:
                return rows
    return rows


def in_span(
    oracle: MomentOracle,
    basis: BasisState,
    t_prime,
    window: WeightWindow | None = None,
    degree: int | None = None,
    k: int | None = None,
    config: LearnConfig = DEFAULT_CONFIG,
) -> bool:
    """Whether the cross-check column of T' lies in the span of the basis columns.

    Builds the accessible submatrix over rows R'(J u T') (subsets of the
    complement of size < degree), runs unconstrained L-infinity regression of
    the T' column against the basis columns, and thresholds the residual at
    half the practical window threshold.  Empty row sets span trivially.
    """
    t_prime = canonical_subset(t_prime)
    k_eff = k if k is not None else max(basis.r, 1)
    deg = degree if degree is not None else moment_degree_cap(k_eff)
    blocked = set(basis.union) | set(t_prime)
    free = tuple(i for i in range(oracle.n) if i not in blocked)
    rows = _row_subsets(free, deg, config.max_regression_rows)
    if not rows:
        return True
    cols = list(basis.sets) + [t_prime]
    E = np.empty((len(rows), len(cols)))
    for cj, T in enumerate(cols):
        for ri, S in enumerate(rows):
            E[ri, cj] = oracle.moment(S + T)
    res = linf_regression(E[:, :-1], E[:, -1], box=None)
    threshold = config.inspan_threshold(k_eff, oracle.tolerance)
    return res.residual < 0.5 * threshold


def grow_by_one(
    oracle: MomentOracle,
    k: int,
    window: WeightWindow | None = None,
    config: LearnConfig = DEFAULT_CONFIG,
) -> BasisState | GrowFailure:
    """Greedy certified-full-rank basis construction.

    Starting from B = {0-set}, tries T u {i} for every T in B and i outside
    the union, in ascending i and insertion order of T, until a full sweep
    adds nothing.  Then verifies every subset of the union is in span; a
    failure there means the restricted moment matrix is rank-deficient, and
    the union is returned as the set to condition on.
    """
    sets: list[tuple[int, ...]] = [()]
    union: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i in range(oracle.n):
            if i in union:
                continue
            added_here = False
            for T in list(sets):
                if len(sets) >= k:
                    break
                cand = canonical_subset(T + (i,))
                if cand in sets:
                    continue
                basis = BasisState(tuple(sets))
                if not in_span(oracle, basis, cand, window, k=k, config=config):
                    sets.append(cand)
                    added_here = True
            if added_here:
                union.add(i)
                changed = True
    basis = BasisState(tuple(sets))
    J = basis.union
    for size in range(0, len(J) + 1):
        for S in itertools.combinations(J, size):
            if S in sets:
                continue
            if not in_span(oracle, basis, S, window, k=k, config=config):
                return GrowFailure(union=J)
    return basis


@dataclass(frozen=True)
class WeightSolution:
    """Box-constrained weight fit, sorted for downstream gap truncation."""

    weights: np.ndarray  # descending
    order: np.ndarray  # weights[i] = raw[order[i]]
    residual: float

    @property
    def raw(self) -> np.ndarray:
        out = np.empty_like(self.weights)
        out[self.order] = self.weights
        return out


def solve_mixing_weights(guessed_rows: np.ndarray, moment_vector) -> WeightSolution:
    """Fit weights in [0,1]^r to M-bar|_B pi = E[x_T], L-infinity sense."""
    A = np.atleast_2d(np.asarray(guessed_rows, dtype=float))
    b = np.asarray(moment_vector, dtype=float).ravel()
    r = A.shape[1]
    solution = None
    if A.shape[0] == r:
        try:
            x = np.linalg.solve(A, b)
            if np.all(x >= -1e-9) and np.all(x <= 1 + 1e-9):
                solution = np.clip(x, 0.0, 1.0)
                residual = float(np.max(np.abs(A @ solution - b)))
        except np.linalg.LinAlgError:
            solution = None
    if solution is None:
        res = linf_regression(A, b, box=(0.0, 1.0))
        solution, residual = res.solution, res.residual
    order = np.argsort(-solution, kind="stable")
    return WeightSolution(weights=solution[order], order=order, residual=residual)


@dataclass(frozen=True)
class CenterRow:
    row: np.ndarray  # rounded to {0, 1/2, 1}
    raw: np.ndarray
    residual: float


def round_to_subcube(values: np.ndarray) -> np.ndarray:
    """Nearest element of {0, 1/2, 1}; exact ties prefer the smaller value."""
    values = np.asarray(values, dtype=float)
    grid = np.array([0.0, 0.5, 1.0])
    dist = np.abs(values[:, None] - grid[None, :])
    return grid[np.argmin(dist, axis=1)]


def solve_center_row(
    guessed_rows: np.ndarray, weights: np.ndarray, moment_vector_i
) -> CenterRow:
    """Solve M-bar|_B diag(pi) x = C[{i}]_B over the box [0,1] and round.

    With a correct guess and a non-impostor coordinate the pre-rounding error
    stays below 1/4, so rounding recovers the true {0, 1/2, 1} row; the
    residual is reported so callers can flag suspect coordinates.
    """
    A = np.atleast_2d(np.asarray(guessed_rows, dtype=float)) * np.asarray(
        weights, dtype=float
    )
    b = np.asarray(moment_vector_i, dtype=float).ravel()
    raw = None
    if A.shape[0] >= A.shape[1]:
        x, sq_res, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank == A.shape[1] and np.all(x >= -1e-9) and np.all(x <= 1 + 1e-9):
            resid = float(np.max(np.abs(A @ np.clip(x, 0, 1) - b)))
            if A.shape[0] == A.shape[1] or resid < 1e-9:
                raw = np.clip(x, 0.0, 1.0)
                residual = resid
    if raw is None:
        res = linf_regression(A, b, box=(0.0, 1.0))
        raw, residual = res.solution, res.residual
    return CenterRow(row=round_to_subcube(raw), raw=raw, residual=residual)


def _subsets_by_size(n: int, degree: int):
    for size in range(0, min(degree, n) + 1):
        yield from itertools.combinations(range(n), size)


def moment_discrepancy_witness(
    candidate: SubcubeMixture,
    oracle: MomentOracle,
    degree: int,
    threshold: float,
) -> tuple[int, ...] | None:
    """First subset (by size, then lex) whose candidate moment misses the oracle.

    Returns None when every moment of degree <= degree matches within the
    threshold.  With a correct basis guess, any witness contains an impostor
    coordinate.
    """
    weights = candidate.weights
    for size in range(0, min(degree, oracle.n) + 1):
        subsets = list(itertools.combinations(range(oracle.n), size))
        rows = moment_rows(candidate.marginals, subsets)
        cand = rows @ weights
        for S, value in zip(subsets, cand):
            if abs(value - oracle.moment(S)) > threshold:
                return S
    return None


def _canonical_guesses(num_rows: int, r: int, cap: int):
    """Odometer enumeration of {0,1/2,1}^(num_rows x r) with sorted columns.

    Digit order 1/2 < 1 < 0 puts near-uniform guesses first.  Guesses whose
    columns are not in nondecreasing digit order are skipped: every guess is a
    column permutation of a canonical one, and the learner is permutation
    covariant.
    """
    if num_rows == 0:
        yield np.zeros((0, r))
        return
    emitted = 0
    digit_rank = {0.5: 0, 1.0: 1, 0.0: 2}
    for flat in itertools.product(SUBCUBE_GRID, repeat=num_rows * r):
        guess = np.array(flat, dtype=float).reshape(num_rows, r)
        cols = [tuple(digit_rank[v] for v in guess[:, j]) for j in range(r)]
        if all(cols[j] <= cols[j + 1] for j in range(r - 1)):
            yield guess
            emitted += 1
            if emitted >= cap:
                return


def _truncation_index(sorted_w: np.ndarray, rule: str, ratio: float, floor: float) -> int:
    """Weight-gap cut: r' in [1, r] per the prose ("smallest") or pseudocode rule."""
    r = sorted_w.shape[0]
    candidates = []
    for rp in range(1, r):
        nxt = sorted_w[rp]
        cur = sorted_w[rp - 1]
        if nxt < floor and (nxt <= 0 or cur / max(nxt, 1e-300) > ratio):
            candidates.append(rp)
    if not candidates:
        return r
    return candidates[0] if rule == "smallest" else candidates[-1]


def nondegenerate_learn_subcubes(
    oracle: MomentOracle,
    k: int,
    config: LearnConfig = DEFAULT_CONFIG,
) -> LearnOutcome:
    """One non-recursive learning pass; mixture, condition sets, or Fail.

    Sweeps the k+1 weight windows, runs GrowByOne per window (identical bases
    deduplicated), enumerates {0,1/2,1} guesses for the basis rows, solves and
    truncates weights, solves and rounds the remaining rows, and verifies all
    moments of degree <= ceil(2 log2(2k)).  The first verified mixture wins;
    otherwise the collected witnesses J u S come back as condition sets.
    """
    if k <= 0:
        return FailOutcome(reason="counter exhausted")
    n = oracle.n
    dcap = min(moment_degree_cap(k), n)
    verify_threshold = config.verify_threshold_for(k, oracle.tolerance)
    floor = config.weight_floor_for(k)
    witnesses: list[tuple[int, ...]] = []
    seen_bases: set[tuple] = set()

    for (tau_small, tau_big) in config.windows(k):
        window = WeightWindow(tau_small, tau_big)
        grown = grow_by_one(oracle, k, window, config=config)
        if isinstance(grown, GrowFailure):
            if grown.union and grown.union not in witnesses:
                witnesses.append(grown.union)
            continue
        key = grown.sets
        if key in seen_bases:
            continue
        seen_bases.add(key)
        outcome = _learn_from_basis(
            oracle, grown, k, dcap, verify_threshold, floor, witnesses, config
        )
        if outcome is not None:
            return outcome

    if witnesses:
        unique = sorted(set(witnesses), key=lambda W: (len(W), W))
        return ConditionSetsOutcome(tuple(unique[: config.max_condition_sets]))
    if k == 1:
        return FailOutcome(reason="k=1 and no verified subcube")
    if config.last_resort_pad and seen_bases:
        basis = BasisState(next(iter(seen_bases)))
        J = basis.union
        outside = [i for i in range(n) if i not in J]
        if outside:
            return ConditionSetsOutcome((canonical_subset(J + (outside[0],)),))
    return FailOutcome(reason="no witness and no verified mixture")


def _learn_from_basis(
    oracle: MomentOracle,
    basis: BasisState,
    k: int,
    dcap: int,
    verify_threshold: float,
    floor: float,
    witnesses: list[tuple[int, ...]],
    config: LearnConfig,
) -> MixtureOutcome | None:
    n = oracle.n
    J = basis.union
    r = basis.r
    j_pos = {coord: idx for idx, coord in enumerate(J)}
    outside = [i for i in range(n) if i not in J]
    basis_moments = np.array([oracle.moment(T) for T in basis.sets])
    cross_moments = {
        i: np.array([oracle.moment(T + (i,)) for T in basis.sets]) for i in outside
    }
    # Screen slack: a correct guess's weight residual stays well below this.
    screen = 2.0 * verify_threshold + k * floor

    for guess in _canonical_guesses(len(J), r, config.max_guesses):
        local_rows = [tuple(j_pos[c] for c in T) for T in basis.sets]
        m_guess = moment_rows(guess, local_rows) if J else np.ones((1, r))
        if r > 1 and abs(np.linalg.det(m_guess)) < 1e-12:
            continue
        wsol = solve_mixing_weights(m_guess, basis_moments)
        if wsol.residual > screen:
            continue
        sorted_w = wsol.weights
        m_sorted = m_guess[:, wsol.order]
        guess_sorted = guess[:, wsol.order] if J else guess
        rp = _truncation_index(sorted_w, config.rprime_rule, config.gap_ratio, floor)
        top_w = sorted_w[:rp]
        total = float(top_w.sum())
        if total <= 0.0:
            continue
        norm_w = top_w / total

        marginals = np.empty((n, rp))
        for idx, coord in enumerate(J):
            marginals[coord] = guess_sorted[idx, :rp]
        for i in outside:
            row = solve_center_row(m_sorted[:, :rp], top_w, cross_moments[i])
            marginals[i] = row.row
        candidate = SubcubeMixture(norm_w, marginals)
        witness = moment_discrepancy_witness(candidate, oracle, dcap, verify_threshold)
        if witness is None:
            return MixtureOutcome(candidate)
        w_set = canonical_subset(J + witness)
        if w_set and w_set not in witnesses:
            witnesses.append(w_set)
    return None
