"""Stochastic decision trees: model, sampler, reduction to subcube mixtures,
Bayes-error oracle, and the classification pipeline.

A tree reads x uniform on {0,1}^n.  Decision nodes branch on a coordinate;
stochastic nodes branch randomly by their edge probabilities; leaves emit a
label.  Conditioned on a label, x is a mixture of subcubes: one component per
root-to-leaf path with that label, fixing the decision-edge coordinates and
uniform elsewhere, weighted by (product of stochastic edge probabilities)
times the probability that a uniform x satisfies the path constraints.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bruteforce import all_points
from .config import DEFAULT_CONFIG, LearnConfig
from .errors import BruteForceCapError, InvalidModelError, ZeroProbabilityError
from .models import SubcubeMixture
from .rng import child_seed, generator
from .tree import ModelSampleSource, NListFail, PoolSampleSource, n_list


@dataclass(frozen=True)
class SdtLeaf:
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise InvalidModelError(f"leaf label must be 0/1, got {self.label}")


@dataclass(frozen=True)
class SdtDecision:
    var: int
    child0: "SdtNode"
    child1: "SdtNode"


@dataclass(frozen=True)
class SdtStochastic:
    children: tuple[tuple[float, "SdtNode"], ...]

    def __post_init__(self) -> None:
        total = sum(p for p, _ in self.children)
        if abs(total - 1.0) > 1e-9:
            raise InvalidModelError(f"stochastic edge probabilities sum to {total!r}")
        if any(p < 0 for p, _ in self.children):
            raise InvalidModelError("negative edge probability")


SdtNode = SdtLeaf | SdtDecision | SdtStochastic


@dataclass(frozen=True)
class StochasticDecisionTree:
    n: int
    root: SdtNode

    def __post_init__(self) -> None:
        def walk(node, depth_vars):
            if isinstance(node, SdtLeaf):
                return 1, 0, 0
            if isinstance(node, SdtDecision):
                if not (0 <= node.var < self.n):
                    raise InvalidModelError(f"decision variable {node.var} out of range")
                l0, d0, s0 = walk(node.child0, depth_vars)
                l1, d1, s1 = walk(node.child1, depth_vars)
                return l0 + l1, d0 + d1 + 1, max(s0, s1)
            leaves = dec = 0
            smax = 0
            for _, child in node.children:
                l, d, sc = walk(child, depth_vars)
                leaves += l
                dec += d
                smax = max(smax, sc)
            return leaves, dec, smax + 1

        leaves, decisions, s = walk(self.root, ())
        object.__setattr__(self, "_leaf_count", leaves)
        object.__setattr__(self, "_stochastic_depth", s)

    @property
    def leaf_count(self) -> int:
        return self._leaf_count

    @property
    def stochastic_depth(self) -> int:
        """Max number of stochastic nodes on any root-to-leaf path."""
        return self._stochastic_depth

    def prob_label1(self, xs: np.ndarray) -> np.ndarray:
        """P(label = 1 | x) for each row of xs, by vectorized tree evaluation."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))

        def go(node) -> np.ndarray:
            if isinstance(node, SdtLeaf):
                return np.full(xs.shape[0], float(node.label))
            if isinstance(node, SdtDecision):
                p0 = go(node.child0)
                p1 = go(node.child1)
                return np.where(xs[:, node.var] == 1, p1, p0)
            out = np.zeros(xs.shape[0])
            for p, child in node.children:
                if p > 0:
                    out += p * go(child)
            return out

        return go(self.root)


def sdt_sample(tree: StochasticDecisionTree, seed: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """(x, label) pairs: x uniform, label by the weighted walk."""
    if count < 1:
        raise InvalidModelError("count must be >= 1")
    rng = generator(seed)
    xs = (rng.random((count, tree.n)) < 0.5).astype(np.uint8)
    p1 = tree.prob_label1(xs)
    labels = (rng.random(count) < p1).astype(np.uint8)
    return xs, labels


def _paths(tree: StochasticDecisionTree):
    """All root-to-leaf paths as (constraints dict, stochastic weight, label)."""
    out = []

    def go(node, constraints, weight):
        if weight == 0.0:
            return
        if isinstance(node, SdtLeaf):
            out.append((dict(constraints), weight, node.label))
            return
        if isinstance(node, SdtDecision):
            for bit, child in ((0, node.child0), (1, node.child1)):
                if node.var in constraints and constraints[node.var] != bit:
                    continue  # contradictory re-read: path unreachable
                nxt = dict(constraints)
                nxt[node.var] = bit
                go(child, nxt, weight)
            return
        for p, child in node.children:
            go(child, constraints, weight * p)

    go(tree.root, {}, 1.0)
    return out


def label_probability(tree: StochasticDecisionTree, b: int) -> float:
    """Pr[label = b] = sum over b-paths of mu_p / 2^{#distinct constraints}."""
    total = 0.0
    for constraints, weight, label in _paths(tree):
        if label == b:
            total += weight * 2.0 ** (-len(constraints))
    return total


def sdt_to_mixture(tree: StochasticDecisionTree, b: int) -> SubcubeMixture:
    """The conditional distribution (x | label = b) as a mixture of subcubes.

    One component per root-to-b-leaf path: the center fixes the decision-edge
    coordinates and is 1/2 elsewhere; its weight is proportional to the
    stochastic-edge product over 2^{#constraints}.  Centers are exactly
    {0, 1/2, 1}-valued; weights are arbitrary reals.
    """
    centers = []
    weights = []
    for constraints, weight, label in _paths(tree):
        if label != b:
            continue
        w = weight * 2.0 ** (-len(constraints))
        if w <= 0.0:
            continue
        col = np.full(tree.n, 0.5)
        for var, bit in constraints.items():
            col[var] = float(bit)
        centers.append(col)
        weights.append(w)
    if not centers:
        raise ZeroProbabilityError(f"label {b} has probability 0")
    w = np.array(weights)
    m = np.stack(centers, axis=1)
    return SubcubeMixture(w / w.sum(), m)


def bayes_optimal_error(tree: StochasticDecisionTree, cap: int = 20) -> float:
    """sum_x 2^-n min(P(1|x), P(0|x)), by exact enumeration."""
    if tree.n > cap:
        raise BruteForceCapError(f"n={tree.n} exceeds brute-force cap {cap}")
    p1 = tree.prob_label1(all_points(tree.n))
    return float(np.minimum(p1, 1.0 - p1).mean())


@dataclass(frozen=True)
class SdtClassifier:
    """argmax_b of the learned joint D'(x, b)."""

    n: int
    b_star: int
    pi_star: float
    conditional: object  # pdf-table-capable distribution over {0,1}^n

    def joint(self, x, b: int) -> float:
        base = self.pi_star * float(_pdf_of(self.conditional, x, self.n))
        return base if b == self.b_star else max(2.0**-self.n - base, 0.0)

    def predict(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
        out = np.empty(xs.shape[0], dtype=np.uint8)
        for i in range(xs.shape[0]):
            d = self.pi_star * float(_pdf_of(self.conditional, xs[i], self.n))
            out[i] = self.b_star if d >= 2.0**-self.n - d else 1 - self.b_star
        return out

    def predict_table(self) -> np.ndarray:
        from .bruteforce import prob_table

        table = prob_table(self.conditional, self.n)
        star = self.pi_star * table
        return np.where(star >= 2.0**-self.n - star, self.b_star, 1 - self.b_star).astype(
            np.uint8
        )


def _pdf_of(dist, x, n: int) -> float:
    if hasattr(dist, "pdf"):
        return dist.pdf(x)
    from .models import pdf_exact

    return pdf_exact(dist, x)


def classifier_error(tree: StochasticDecisionTree, classifier: SdtClassifier,
                     cap: int = 20) -> float:
    """Exact misclassification probability of the classifier under the tree."""
    if tree.n > cap:
        raise BruteForceCapError(f"n={tree.n} exceeds brute-force cap {cap}")
    p1 = tree.prob_label1(all_points(tree.n))
    pred = classifier.predict_table()
    err = np.where(pred == 1, 1.0 - p1, p1)
    return float(err.mean())


def learn_sdt_classifier(
    xs: np.ndarray,
    labels: np.ndarray,
    k: int,
    epsilon: float,
    config: LearnConfig = DEFAULT_CONFIG,
    seed: int = 0,
) -> SdtClassifier:
    """Estimate the majority label, learn its conditional with the subcube
    pipeline at epsilon/2, and return the argmax-of-joint classifier.

    Degenerate all-one-label data short-circuits to a constant classifier.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    labels = np.asarray(labels, dtype=np.uint8).ravel()
    if xs.shape[0] != labels.shape[0] or xs.shape[0] == 0:
        raise InvalidModelError("need matching, nonempty samples and labels")
    n = xs.shape[1]
    pi1 = float(labels.mean())
    b_star = 1 if pi1 >= 0.5 else 0
    pi_star = pi1 if b_star == 1 else 1.0 - pi1
    positives = xs[labels == b_star]
    if pi_star >= 1.0 - 1e-12:
        # Constant-label data: the conditional is plain uniform.
        uniform = SubcubeMixture([1.0], np.full((n, 1), 0.5))
        return SdtClassifier(n=n, b_star=b_star, pi_star=1.0, conditional=uniform)

    source = PoolSampleSource(positives)
    sub_config = config.with_epsilon(epsilon / 2.0)
    tree = n_list(source, (), (), k, sub_config, seed=child_seed(seed, "sdt"), learner="subcube")
    if isinstance(tree, NListFail):
        raise InvalidModelError(f"subcube pipeline failed: {tree.reason}")
    return SdtClassifier(n=n, b_star=b_star, pi_star=pi_star, conditional=tree)


def random_sdt(
    n: int,
    k: int,
    s: int,
    seed: int,
    dyadic: bool = True,
    max_fanout: int = 3,
) -> StochasticDecisionTree:
    """Seeded random tree generator for tests: k leaves, at most s stochastic
    nodes per root-to-leaf path, stochastic fan-out at most ``max_fanout``.

    With ``dyadic`` the stochastic probabilities come from a dyadic palette so
    conditional mixtures are exact subcube mixtures; otherwise probabilities
    are arbitrary (exercising the product-learner path).
    """
    if k < 1 or n < 1 or s < 0:
        raise InvalidModelError("need n, k >= 1 and s >= 0")
    rng = generator(seed)

    def build(leaves: int, stoch_left: int, used: tuple[int, ...]):
        if leaves == 1:
            return SdtLeaf(int(rng.integers(0, 2)))
        can_stoch = stoch_left > 0 and leaves >= 2
        make_stoch = can_stoch and (rng.random() < 0.4 or len(used) >= n)
        if not make_stoch and len(used) >= n:
            # No unused variables left; must go stochastic or stop.
            if not can_stoch:
                return SdtLeaf(int(rng.integers(0, 2)))
            make_stoch = True
        if make_stoch:
            fan = int(rng.integers(2, min(max_fanout, leaves) + 1))
            split = _random_composition(rng, leaves, fan)
            if dyadic:
                probs = _dyadic_probs(rng, fan)
            else:
                raw = rng.random(fan) + 0.1
                probs = raw / raw.sum()
            children = tuple(
                (float(p), build(cnt, stoch_left - 1, used))
                for p, cnt in zip(probs, split)
            )
            return SdtStochastic(children=children)
        var = int(rng.choice([v for v in range(n) if v not in used]))
        left = int(rng.integers(1, leaves))
        return SdtDecision(
            var=var,
            child0=build(left, stoch_left, used + (var,)),
            child1=build(leaves - left, stoch_left, used + (var,)),
        )

    return StochasticDecisionTree(n=n, root=build(k, s, ()))


def _random_composition(rng, total: int, parts: int) -> list[int]:
    cuts = sorted(rng.choice(np.arange(1, total), size=parts - 1, replace=False).tolist())
    prev = 0
    out = []
    for c in cuts + [total]:
        out.append(c - prev)
        prev = c
    return out


def _dyadic_probs(rng, fan: int) -> np.ndarray:
    """Probabilities with denominator 8 summing to 1."""
    while True:
        raw = rng.integers(1, 8, size=fan)
        if raw.sum() <= 8:
            break
    raw = raw.astype(float)
    probs = raw / 8.0
    probs[-1] += 1.0 - probs.sum()
    return probs
