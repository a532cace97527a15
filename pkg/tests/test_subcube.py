import itertools
import math

import numpy as np
import pytest

from conftest import random_subcube_mixture, subsets_upto
from cubemix.bruteforce import tvd_bruteforce
from cubemix.config import LearnConfig, moment_degree_cap
from cubemix.linalg import moment_rows
from cubemix.models import SubcubeMixture, exact_moment, sample
from cubemix.oracles import EmpiricalOracle, ExactOracle
from cubemix.subcube import (
    BasisState,
    ConditionSetsOutcome,
    FailOutcome,
    GrowFailure,
    MixtureOutcome,
    WeightWindow,
    grow_by_one,
    in_span,
    moment_discrepancy_witness,
    nondegenerate_learn_subcubes,
    round_to_subcube,
    solve_center_row,
    solve_mixing_weights,
)


def parity3_positive(n: int) -> SubcubeMixture:
    pats = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
    marg = np.full((n, 4), 0.5)
    for j, p in enumerate(pats):
        for i in range(3):
            marg[i, j] = p[i]
    return SubcubeMixture([0.25] * 4, marg)


def two_sparse_parity(n: int) -> SubcubeMixture:
    marg = np.full((n, 2), 0.5)
    marg[0] = [1.0, 0.0]
    marg[1] = [1.0, 0.0]
    return SubcubeMixture([0.5, 0.5], marg)


class TestTypes:
    def test_basis_requires_empty_first(self):
        from cubemix.errors import InvalidModelError

        with pytest.raises(InvalidModelError):
            BasisState(((0,),))

    def test_window_ordering(self):
        from cubemix.errors import InvalidModelError

        with pytest.raises(InvalidModelError):
            WeightWindow(0.5, 0.1)

    def test_condition_sets_nonempty(self):
        from cubemix.errors import InvalidModelError

        with pytest.raises(InvalidModelError):
            ConditionSetsOutcome(())


class TestInSpan:
    def test_uniform_true(self):
        model = SubcubeMixture([1.0], np.full((4, 1), 0.5))
        oracle = ExactOracle(model)
        assert in_span(oracle, BasisState(((),)), (0,), k=1)

    def test_parity_false(self):
        # Oracle: enumerate the 4 positive patterns; E[x0 x1 x2] = 1/4 while
        # any multiple of the empty column forces 1/8 at the row {1, 2}.
        pats = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]
        assert np.mean([a * b * c for a, b, c in pats]) == pytest.approx(0.25)
        model = parity3_positive(6)
        oracle = ExactOracle(model)
        assert not in_span(oracle, BasisState(((),)), (0,), k=4)

    def test_stable_under_perturbation(self):
        model = parity3_positive(6)
        exact = ExactOracle(model)

        class Perturbed:
            n = 6
            tolerance = 1e-4

            def __init__(self, sign):
                self.sign = sign

            def moment(self, S):
                S = tuple(sorted(set(S)))
                if not S:
                    return 1.0
                return exact.moment(S) + self.sign * 1e-4

        for tprime in ((0,), (3,)):
            base = in_span(exact, BasisState(((),)), tprime, k=4)
            for sign in (-1.0, 1.0):
                assert in_span(Perturbed(sign), BasisState(((),)), tprime, k=4) == base

    def test_empty_rows_span_trivially(self):
        model = two_sparse_parity(2)
        oracle = ExactOracle(model)
        assert in_span(oracle, BasisState(((), (0,))), (1,), k=2)


class TestGrowByOne:
    def test_uniform(self):
        oracle = ExactOracle(SubcubeMixture([1.0], np.full((4, 1), 0.5)))
        grown = grow_by_one(oracle, 1)
        assert grown.sets == ((),)

    def test_two_sparse_parity(self):
        # Brute-force oracle: moment-matrix rows (), (0,) are independent and
        # certifiable; the grown basis matches.
        model = two_sparse_parity(6)
        rows = moment_rows(model.marginals, [(), (0,)])
        assert np.linalg.matrix_rank(rows) == 2
        grown = grow_by_one(ExactOracle(model), 2)
        assert grown.sets == ((), (0,))

    def test_duplicate_center_collapses(self):
        # Two identical centers realize a rank-1 distribution: B stays {()}.
        marg = np.tile(np.full((5, 1), 0.5), (1, 2))
        model = SubcubeMixture([0.4, 0.6], marg)
        grown = grow_by_one(ExactOracle(model), 2)
        assert not isinstance(grown, GrowFailure)
        assert grown.sets == ((),)

    def test_rows_independent_for_every_realization(self):
        # The certified basis rows must be independent in the generating
        # realization's moment matrix (checked by brute-force rank).
        for seed in range(20):
            model = random_subcube_mixture(7, 3, seed + 300)
            grown = grow_by_one(ExactOracle(model), 3)
            if isinstance(grown, GrowFailure):
                continue
            rows = moment_rows(model.marginals, list(grown.sets))
            assert np.linalg.matrix_rank(rows, tol=1e-9) == len(grown.sets)


class TestWeightAndRowSolvers:
    def test_single_component(self):
        sol = solve_mixing_weights(np.array([[1.0]]), [1.0])
        assert sol.weights[0] == pytest.approx(1.0)

    def test_two_by_two(self):
        sol = solve_mixing_weights(np.array([[1.0, 1.0], [1.0, 0.0]]), [1.0, 0.25])
        assert np.allclose(sol.raw, [0.25, 0.75])
        assert np.allclose(sol.weights, [0.75, 0.25])

    def test_perturbation_stability(self):
        A = np.array([[1.0, 1.0], [1.0, 0.0]])
        base = solve_mixing_weights(A, [1.0, 0.25])
        for sign in (-1, 1):
            moved = solve_mixing_weights(A, [1.0 + sign * 1e-6, 0.25 - sign * 1e-6])
            assert np.abs(moved.raw - base.raw).max() <= 1e-4

    def test_center_row_rounding(self):
        assert round_to_subcube(np.array([0.26])) == pytest.approx([0.5])
        assert round_to_subcube(np.array([0.24])) == pytest.approx([0.0])
        assert round_to_subcube(np.array([0.25])) == pytest.approx([0.0])  # tie down
        assert round_to_subcube(np.array([0.76])) == pytest.approx([1.0])

    def test_center_row_k1(self):
        model = SubcubeMixture([1.0], np.array([[1.0], [0.0], [0.5]]))
        xs = sample(model, 0, 20_000)
        oracle = EmpiricalOracle(xs)
        for i, want in ((0, 1.0), (1, 0.0), (2, 0.5)):
            row = solve_center_row(np.ones((1, 1)), np.array([1.0]), [oracle.moment((i,))])
            assert row.row[0] == want

    def test_center_row_exact_recovery(self):
        model = two_sparse_parity(5)
        oracle = ExactOracle(model)
        basis = [(), (0,)]
        m_guess = moment_rows(model.marginals[[0]], [(), (0,)])
        weights = np.array([0.5, 0.5])
        for i in range(1, 5):
            moments = [oracle.moment(tuple(sorted(set(T) | {i}))) for T in basis]
            row = solve_center_row(m_guess, weights, moments)
            assert np.array_equal(row.row, model.marginals[i])


class TestWitness:
    def test_truth_has_no_witness(self):
        model = random_subcube_mixture(6, 2, 5)
        oracle = ExactOracle(model)
        assert moment_discrepancy_witness(model, oracle, 4, 1e-9) is None

    def test_uniform_vs_parity(self):
        truth = parity3_positive(6)
        uniform = SubcubeMixture([1.0], np.full((6, 1), 0.5))
        w = moment_discrepancy_witness(uniform, ExactOracle(truth), 3, 1e-6)
        assert w == (0, 1, 2)
        # Discrepancy magnitude by direct enumeration: 1/4 vs 1/8.
        assert abs(exact_moment(truth, (0, 1, 2)) - 1 / 8) == pytest.approx(1 / 8)

    def test_vacuous_threshold(self):
        truth = parity3_positive(6)
        uniform = SubcubeMixture([1.0], np.full((6, 1), 0.5))
        assert moment_discrepancy_witness(uniform, ExactOracle(truth), 3, 1.0) is None


class TestNonDegenerateLearn:
    def test_counter_zero_fails(self):
        oracle = ExactOracle(random_subcube_mixture(4, 2, 0))
        assert isinstance(nondegenerate_learn_subcubes(oracle, 0), FailOutcome)

    def test_single_subcube_exact(self):
        model = SubcubeMixture([1.0], np.array([[1.0], [0.0], [0.5], [0.5]]))
        out = nondegenerate_learn_subcubes(ExactOracle(model), 1)
        assert isinstance(out, MixtureOutcome)
        assert np.array_equal(out.mixture.marginals, model.marginals)

    def test_exact_moment_match_on_nondegenerate(self):
        # On exact oracles of non-degenerate models, every moment of degree
        # <= cap matches exactly.
        learned = 0
        for seed in range(12):
            model = random_subcube_mixture(6, 2, seed + 900)
            if model.weights.min() < 0.02:
                # Tiny weights sit inside the truncation window; the learner
                # is then allowed (and supposed) to drop the component.
                continue
            oracle = ExactOracle(model)
            rank = np.linalg.matrix_rank(
                moment_rows(model.marginals, list(subsets_upto(6, 6))), tol=1e-9
            )
            grown = grow_by_one(oracle, 2)
            if isinstance(grown, GrowFailure) or grown.r != rank:
                # Degenerate instance (impostor coordinates): exact-match
                # guarantee does not apply.
                continue
            out = nondegenerate_learn_subcubes(oracle, 2)
            if not isinstance(out, MixtureOutcome):
                continue
            learned += 1
            cap = moment_degree_cap(2)
            for S in subsets_upto(6, cap):
                assert exact_moment(out.mixture, S) == pytest.approx(
                    exact_moment(model, S), abs=1e-9
                )
        assert learned >= 8

    def test_empirical_two_subcubes(self):
        model = two_sparse_parity(8)
        xs = sample(model, 42, 100_000)
        oracle = EmpiricalOracle(xs)
        out = nondegenerate_learn_subcubes(oracle, 2, LearnConfig(epsilon=0.1))
        assert isinstance(out, MixtureOutcome)
        assert tvd_bruteforce(out.mixture, model, 8) <= 0.1

    def test_determinism(self):
        model = two_sparse_parity(6)
        xs = sample(model, 7, 50_000)
        o1 = EmpiricalOracle(xs)
        o2 = EmpiricalOracle(xs)
        out1 = nondegenerate_learn_subcubes(o1, 2)
        out2 = nondegenerate_learn_subcubes(o2, 2)
        assert isinstance(out1, MixtureOutcome) and isinstance(out2, MixtureOutcome)
        assert np.array_equal(out1.mixture.weights, out2.mixture.weights)
        assert np.array_equal(out1.mixture.marginals, out2.mixture.marginals)

    def test_parity3_yields_condition_sets(self):
        out = nondegenerate_learn_subcubes(ExactOracle(parity3_positive(6)), 3)
        assert isinstance(out, ConditionSetsOutcome)
        assert all(len(W) <= 3 + 2 * math.ceil(2 * math.log2(6)) for W in out.sets)


class TestIdentifiabilityLemmas:
    def test_log_moment_span(self):
        # Rows of degree < 2 log2 k span all rows of M (brute force over all
        # 2^n rows at n <= 10).
        for seed in range(40):
            k = 2 + seed % 7
            model = random_subcube_mixture(8, k, seed + 1000)
            degree = max(1, math.ceil(2 * math.log2(k)))
            low = moment_rows(model.marginals, list(subsets_upto(8, degree - 1)))
            full = moment_rows(model.marginals, list(subsets_upto(8, 8)))
            r_low = np.linalg.matrix_rank(low, tol=1e-8)
            r_all = np.linalg.matrix_rank(np.vstack([low, full]), tol=1e-8)
            assert r_low == r_all

    def test_robust_identifiability_pairs(self):
        found = 0
        for seed in range(60):
            d1 = random_subcube_mixture(6, 1 + seed % 3, seed)
            d2 = random_subcube_mixture(6, 1 + (seed // 3) % 3, seed + 5000)
            if tvd_bruteforce(d1, d2, 6) <= 0.1:
                continue
            found += 1
            degree = max(1, math.ceil(2 * math.log2(d1.k + d2.k)))
            gap = max(
                abs(exact_moment(d1, S) - exact_moment(d2, S))
                for S in subsets_upto(6, degree - 1)
            )
            assert gap > 1e-6
        assert found >= 30
