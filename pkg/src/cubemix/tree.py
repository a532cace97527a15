"""Sampling trees and the recursive N-List driver.

A sampling tree conditions on successively larger coordinate sets: each
internal node branches on the assignments of a coordinate set W with weighted
edges, and each leaf holds a mixture over the remaining coordinates.
Sampling walks the tree by edge weights and draws from the reached leaf;
density evaluation multiplies the edge weights along the unique consistent
path with the leaf density.

N-List builds such a tree: it conditions samples by rejection, runs the
configured non-recursive learner, wraps returned mixtures as leaves, recurses
on returned condition sets with estimated edge weights, and picks the best
assembled candidate by a Scheffe tournament.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bruteforce import all_points, mixture_table, prob_table
from .config import DEFAULT_CONFIG, LearnConfig
from .errors import InsufficientSamplesError, InvalidModelError
from .models import ProductMixture, SubcubeMixture, pdf_exact, sample
from .oracles import EmpiricalOracle
from .rng import child_seed, generator
from . import subcube as _subcube

EDGE_TOL = 1e-9


class Insufficient:
    """Sentinel value: rejection sampling kept fewer samples than required."""

    def __init__(self, kept: int, required: int):
        self.kept = kept
        self.required = required

    def __repr__(self) -> str:  # pragma: no cover
        return f"Insufficient(kept={self.kept}, required={self.required})"


@dataclass(frozen=True)
class TreeLeaf:
    """Leaf distribution over the listed (global) coordinates."""

    coords: tuple[int, ...]
    dist: ProductMixture

    def __post_init__(self) -> None:
        if self.dist.n != len(self.coords):
            raise InvalidModelError(
                f"leaf distribution has n={self.dist.n}, coords {self.coords}"
            )


@dataclass(frozen=True)
class TreeNode:
    """Internal node branching on W with one weighted edge per assignment."""

    coords: tuple[int, ...]
    branch: tuple[int, ...]  # W, subset of coords
    edges: tuple[tuple[tuple[int, ...], float, "TreeNode | TreeLeaf"], ...]

    def __post_init__(self) -> None:
        if not self.branch or not set(self.branch) <= set(self.coords):
            raise InvalidModelError("branch coordinates must be node coordinates")
        total = sum(w for _, w, _ in self.edges)
        if abs(total - 1.0) > EDGE_TOL:
            raise InvalidModelError(f"edge weights sum to {total!r}, not 1")
        child_coords = tuple(c for c in self.coords if c not in self.branch)
        for t, w, child in self.edges:
            if len(t) != len(self.branch) or w < -EDGE_TOL:
                raise InvalidModelError("malformed edge")
            if child.coords != child_coords:
                raise InvalidModelError(
                    f"child coords {child.coords} != expected {child_coords}"
                )


@dataclass(frozen=True)
class SamplingTree:
    """Root of a sampling tree over {0,1}^n."""

    n: int
    root: TreeNode | TreeLeaf

    def __post_init__(self) -> None:
        if self.root.coords != tuple(range(self.n)):
            raise InvalidModelError("root must cover coordinates 0..n-1")

    def depth(self) -> int:
        def go(node) -> int:
            if isinstance(node, TreeLeaf):
                return 0
            return 1 + max(go(child) for _, _, child in node.edges)

        return go(self.root)

    def pdf(self, x) -> float:
        return tree_pdf(self, x)

    def pdf_table(self, n: int) -> np.ndarray:
        if n != self.n:
            raise InvalidModelError(f"tree over n={self.n}, requested {n}")
        return _node_table(self.root, all_points(n))


def _node_table(node, pts: np.ndarray) -> np.ndarray:
    """Vectorized density of a node over rows of pts (columns = node.coords)."""
    if isinstance(node, TreeLeaf):
        if not node.coords:
            return np.ones(pts.shape[0])
        table = mixture_table(node.dist)
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for j in range(len(node.coords)):
            idx |= pts[:, j].astype(np.int64) << j
        return table[idx]
    pos = {c: i for i, c in enumerate(node.coords)}
    bcols = [pos[c] for c in node.branch]
    rest_cols = [pos[c] for c in node.coords if c not in node.branch]
    out = np.zeros(pts.shape[0])
    for t, w, child in node.edges:
        if w == 0.0:
            continue
        mask = np.all(pts[:, bcols] == np.asarray(t, dtype=pts.dtype), axis=1)
        if np.any(mask):
            out[mask] += w * _node_table(child, pts[mask][:, rest_cols])
    return out


def tree_pdf(tree: SamplingTree, x) -> float:
    """Density of one point: edge weights along the consistent path times leaf pdf."""
    x = np.asarray(x).ravel()
    if x.shape[0] != tree.n:
        raise InvalidModelError(f"point has length {x.shape[0]}, tree n={tree.n}")

    def go(node, vec) -> float:
        if isinstance(node, TreeLeaf):
            return pdf_exact(node.dist, vec) if len(vec) else 1.0
        pos = {c: i for i, c in enumerate(node.coords)}
        t = tuple(int(vec[pos[c]]) for c in node.branch)
        rest = [pos[c] for c in node.coords if c not in node.branch]
        sub = vec[rest]
        for tt, w, child in node.edges:
            if tt == t:
                return w * go(child, sub)
        return 0.0

    return float(go(tree.root, x.astype(np.uint8)))


def tree_sample(tree: SamplingTree, seed: int, count: int) -> np.ndarray:
    """Draw samples by weighted walks; deterministic given seed."""
    if count < 1:
        raise InvalidModelError("count must be >= 1")

    def go(node, node_seed, m) -> np.ndarray:
        out = np.empty((m, len(node.coords)), dtype=np.uint8)
        if m == 0:
            return out
        if isinstance(node, TreeLeaf):
            if node.coords:
                out[:] = sample(node.dist, node_seed, m)
            return out
        pos = {c: i for i, c in enumerate(node.coords)}
        rest = [c for c in node.coords if c not in node.branch]
        weights = np.clip(np.array([w for _, w, _ in node.edges]), 0, None)
        weights = weights / weights.sum()
        counts = generator(node_seed).multinomial(m, weights)
        rows = 0
        for (t, _, child), cnt in zip(node.edges, counts):
            if cnt == 0:
                continue
            sub = go(child, child_seed(node_seed, t), cnt)
            block = out[rows : rows + cnt]
            for j, c in enumerate(node.branch):
                block[:, pos[c]] = t[j]
            for j, c in enumerate(rest):
                block[:, pos[c]] = sub[:, j]
            rows += cnt
        return out[generator(child_seed(node_seed, "shuffle")).permutation(m)]

    return go(tree.root, seed, count)


def leaf_tree(n: int, dist: ProductMixture) -> SamplingTree:
    return SamplingTree(n=n, root=TreeLeaf(coords=tuple(range(n)), dist=dist))


# ---------------------------------------------------------------------------
# Conditioning, edge-weight estimation, Scheffe selection.
# ---------------------------------------------------------------------------


def rejection_condition(samples: np.ndarray, S, s, required: int = 0):
    """Samples with x_S = s, projected to the remaining coordinates.

    Returns the projected array, or an :class:`Insufficient` value when fewer
    than ``required`` rows survive.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
    pairs = sorted(zip((int(i) for i in S), (int(b) for b in np.asarray(s).ravel())))
    if len({c for c, _ in pairs}) != len(pairs):
        raise InvalidModelError(f"duplicate coordinates in subset {S}")
    if not pairs:
        kept = samples
    else:
        cols = [c for c, _ in pairs]
        vals = np.array([b for _, b in pairs], dtype=np.uint8)
        mask = np.all(samples[:, cols] == vals, axis=1)
        keep_cols = [i for i in range(samples.shape[1]) if i not in set(cols)]
        kept = samples[mask][:, keep_cols]
    if kept.shape[0] < required:
        return Insufficient(kept=kept.shape[0], required=required)
    return kept


def estimate_edge_weights(samples: np.ndarray, S, s, W) -> dict[tuple[int, ...], float]:
    """Conditional frequencies of x_W given x_S = s, renormalized to sum 1."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
    survivors = rejection_condition(samples, S, s, required=1)
    if isinstance(survivors, Insufficient):
        raise InsufficientSamplesError("no samples satisfy the conditioning event")
    S_sorted = tuple(sorted(int(i) for i in S))
    remaining = [i for i in range(samples.shape[1]) if i not in set(S_sorted)]
    local = {c: j for j, c in enumerate(remaining)}
    cols = [local[int(w)] for w in W]
    m = survivors.shape[0]
    weights: dict[tuple[int, ...], float] = {}
    for t in itertools.product((0, 1), repeat=len(cols)):
        mask = np.all(survivors[:, cols] == np.asarray(t, dtype=np.uint8), axis=1)
        weights[t] = float(np.count_nonzero(mask)) / m
    total = sum(weights.values())
    return {t: w / total for t, w in weights.items()}


def scheffe_select(candidates, samples: np.ndarray, epsilon: float,
                   cap: int = 20, max_pairwise: int = 4096) -> int:
    """Index of the pairwise Scheffe-tournament winner (lowest index on ties).

    Uses ceil(8 eps^-2 log(2|L|)) samples (all available if fewer).  If some
    candidate is eps-close to the sample source, the winner is O(eps)-close.
    Candidate densities are tabulated by full enumeration, so the dimension
    must be under the brute-force cap.  Lists larger than ``max_pairwise``
    are reduced by blocked elimination before the final tournament.
    """
    cands = list(candidates)
    if not cands:
        raise InvalidModelError("scheffe_select needs at least one candidate")
    if len(cands) == 1:
        return 0
    samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
    n = samples.shape[1]
    need = int(np.ceil(8.0 / epsilon**2 * np.log(2 * len(cands))))
    use = samples[: max(1, min(need, samples.shape[0]))]
    codes = np.zeros(use.shape[0], dtype=np.int64)
    for j in range(n):
        codes |= use[:, j].astype(np.int64) << j

    tables = np.stack([prob_table(c, n, cap=cap) for c in cands])
    hist = np.bincount(codes, minlength=1 << n).astype(float) / use.shape[0]

    indices = list(range(len(cands)))
    while len(indices) > max_pairwise:
        winners = []
        for start in range(0, len(indices), max_pairwise):
            block = indices[start : start + max_pairwise]
            winners.append(block[_tournament(tables[block], hist)])
        indices = winners
    return indices[_tournament(tables[indices], hist)]


def _tournament(tables: np.ndarray, hist: np.ndarray) -> int:
    """Pairwise duels on Scheffe sets A_ij = {x : p_i(x) > p_j(x)}.

    For each unordered pair, the candidate whose A_ij-mass is closer to the
    empirical mass wins the duel (ties to the lower index); the tournament
    winner has the most duel wins, first index on ties.  Vectorized one row
    of opponents at a time.
    """
    L = tables.shape[0]
    wins = np.zeros(L, dtype=np.int64)
    for i in range(L - 1):
        opp = tables[i + 1 :]  # (J, size)
        mask = tables[i][None, :] > opp
        theta = mask @ hist
        wi = np.abs((mask * tables[i][None, :]).sum(axis=1) - theta)
        wj = np.abs((mask * opp).sum(axis=1) - theta)
        i_beats = wi <= wj
        wins[i] += int(np.count_nonzero(i_beats))
        wins[i + 1 :] += (~i_beats).astype(np.int64)
    # argmax returns the first maximum: deterministic lowest-index tie-break.
    return int(np.argmax(wins))


# ---------------------------------------------------------------------------
# N-List.
# ---------------------------------------------------------------------------


class ModelSampleSource:
    """Fresh seeded draws from a known model (experiment mode)."""

    def __init__(self, model: ProductMixture):
        self.model = model
        self.n = model.n

    def draw(self, count: int, seed: int) -> np.ndarray:
        return sample(self.model, seed, count)


class PoolSampleSource:
    """A fixed sample pool (file mode); every draw returns the whole pool."""

    def __init__(self, samples: np.ndarray):
        self.samples = np.atleast_2d(np.asarray(samples, dtype=np.uint8))
        self.n = self.samples.shape[1]

    def draw(self, count: int, seed: int) -> np.ndarray:
        return self.samples


@dataclass(frozen=True)
class NListFail:
    reason: str = ""


def _point_mass(coords: tuple[int, ...]) -> SubcubeMixture:
    """Point mass at the all-ones string (Insufficient-branch leaf)."""
    return SubcubeMixture([1.0], np.ones((len(coords), 1)))


def n_list(
    source,
    S,
    s,
    counter: int,
    config: LearnConfig = DEFAULT_CONFIG,
    seed: int = 0,
    learner: str = "subcube",
) -> SamplingTree | NListFail:
    """Learn (D | x_S = s) as a sampling tree over the remaining coordinates.

    The returned tree lives on the conditional space, relabeled to
    0..n-|S|-1 in the order of the surviving coordinates; with S empty (the
    usual entry point) that is the full space.  Returns NListFail only when
    the counter is exhausted or every recursive branch fails.
    """
    node = _n_list_node(source, S, s, counter, config, seed, learner)
    if isinstance(node, NListFail):
        return node
    coords = node.coords
    return SamplingTree(n=len(coords), root=_relabel(node, coords))


def _n_list_node(source, S, s, counter, config, seed, learner):
    if counter <= 0:
        return NListFail(reason="counter exhausted")
    pairs = sorted(zip((int(i) for i in S), (int(b) for b in s)))
    S = tuple(c for c, _ in pairs)
    s = tuple(b for _, b in pairs)
    coords = tuple(i for i in range(source.n) if i not in set(S))

    raw = source.draw(config.node_sample_count, child_seed(seed, "draw", S, s))
    survivors = rejection_condition(raw, S, s, config.min_conditioned_samples)
    if isinstance(survivors, Insufficient):
        return TreeLeaf(coords=coords, dist=_point_mass(coords))
    oracle = EmpiricalOracle(survivors, confidence=config.oracle_confidence)

    if learner == "subcube":
        outcome = _subcube.nondegenerate_learn_subcubes(oracle, counter, config)
        if isinstance(outcome, _subcube.MixtureOutcome):
            mixtures, cond_sets = [outcome.mixture], []
        elif isinstance(outcome, _subcube.ConditionSetsOutcome):
            mixtures, cond_sets = [], [tuple(W) for W in outcome.sets]
        else:
            return NListFail(reason=outcome.reason)
    elif learner == "product":
        from . import product as _product

        out = _product.nondegenerate_learn_products(
            oracle,
            counter,
            _product.GridSpec.defaults(config.epsilon, counter, len(coords)),
            config,
        )
        if isinstance(out, _subcube.FailOutcome):
            return NListFail(reason=out.reason)
        mixtures = list(out.mixtures[: config.max_candidates])
        cond_sets = [tuple(W) for W in out.condition_sets]
    else:
        raise InvalidModelError(f"unknown learner {learner!r}")

    local_trees: list[TreeLeaf | TreeNode] = [
        TreeLeaf(coords=coords, dist=mix) for mix in mixtures
    ]

    if counter > 1:
        for W_local in cond_sets[: config.max_condition_sets]:
            W_global = tuple(sorted(coords[j] for j in W_local))
            if not W_global:
                continue
            try:
                freq = estimate_edge_weights(raw, S, s, W_global)
            except InsufficientSamplesError:
                continue
            edges = []
            failed = False
            for t in itertools.product((0, 1), repeat=len(W_global)):
                sub = _n_list_node(
                    source,
                    S + W_global,
                    s + t,
                    counter - 1,
                    config,
                    child_seed(seed, "branch", W_global, t),
                    learner,
                )
                if isinstance(sub, NListFail):
                    failed = True
                    break
                edges.append((t, freq[t], sub))
            if failed:
                continue
            local_trees.append(
                TreeNode(coords=coords, branch=W_global, edges=tuple(edges))
            )

    if not local_trees:
        return NListFail(reason="every branch failed")
    if len(local_trees) == 1:
        return local_trees[0]

    select_raw = source.draw(config.node_sample_count, child_seed(seed, "select", S, s))
    select = rejection_condition(select_raw, S, s, 1)
    if isinstance(select, Insufficient):
        return local_trees[0]
    wrapped = [
        SamplingTree(n=len(coords), root=_relabel(t, coords)) for t in local_trees
    ]
    best = scheffe_select(
        wrapped,
        select,
        config.select_epsilon_for(),
        cap=config.bruteforce_cap,
        max_pairwise=config.scheffe_max_pairwise,
    )
    return local_trees[best]


def _relabel(node, coords):
    """Relabel a subtree over global ``coords`` to local labels 0..len-1."""
    mapping = {c: i for i, c in enumerate(coords)}

    def go(nd):
        new_coords = tuple(mapping[c] for c in nd.coords)
        if isinstance(nd, TreeLeaf):
            return TreeLeaf(coords=new_coords, dist=nd.dist)
        return TreeNode(
            coords=new_coords,
            branch=tuple(mapping[c] for c in nd.branch),
            edges=tuple((t, w, go(ch)) for t, w, ch in nd.edges),
        )

    return go(node)
