import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cubemix.errors import LPError
from cubemix.linalg import (
    barycentric_spanner,
    entrywise_product,
    linf_regression,
    moment_rows,
    sigma_inf_min,
    sigma_inf_min_witness,
    vandermonde_kernel,
)


def vertex_linf_oracle(A, b, lo, hi):
    """Exact brute-force oracle for min ||Ax - b||_inf over a box.

    The optimum of the epigraph LP sits at a vertex where r+1 of the
    constraints {A_i x - t <= b_i, -A_i x - t <= -b_i, x_j <= hi, -x_j <= -lo}
    are tight: enumerate every r+1 subset, solve the square system, keep
    feasible points, return the best objective.  Independent of any pivoting
    logic.
    """
    import itertools as it

    A = np.asarray(A, float)
    m, r = A.shape
    rows = []
    rhs = []
    for i in range(m):
        rows.append(np.concatenate([A[i], [-1.0]]))
        rhs.append(b[i])
        rows.append(np.concatenate([-A[i], [-1.0]]))
        rhs.append(-b[i])
    for j in range(r):
        e = np.zeros(r + 1)
        e[j] = 1.0
        rows.append(e.copy())
        rhs.append(hi)
        e[j] = -1.0
        rows.append(e)
        rhs.append(-lo)
    G = np.asarray(rows)
    h = np.asarray(rhs, float)
    best = math.inf
    for subset in it.combinations(range(G.shape[0]), r + 1):
        M = G[list(subset)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        y = np.linalg.solve(M, h[list(subset)])
        if np.all(G @ y <= h + 1e-9):
            best = min(best, float(y[-1]))
    return best


def vertex_sigma_oracle(A):
    A = np.asarray(A, float)
    r = A.shape[1]
    best = math.inf
    for j in range(r):
        rest = [c for c in range(r) if c != j]
        best = min(best, vertex_linf_oracle(A[:, rest], -A[:, j], -1.0, 1.0))
    return best


def _line_min_exact(resid, col, lo, hi):
    """Exact min over delta in [lo, hi] of max_i |resid_i + col_i * delta|.

    The objective is the upper envelope of V-shaped piecewise-linear
    functions; its minimum sits at an endpoint, a vertex delta = -r_i/a_i, or
    a crossing of two branches s1*(r_i + a_i d) = s2*(r_j + a_j d).
    """
    cands = [lo, hi]
    for i in range(len(col)):
        if abs(col[i]) > 1e-14:
            cands.append(-resid[i] / col[i])
        for j in range(i + 1, len(col)):
            for s in (1.0, -1.0):
                denom = col[i] - s * col[j]
                if abs(denom) > 1e-14:
                    cands.append((s * resid[j] - resid[i]) / denom)
    cands = np.clip(np.asarray(cands), lo, hi)
    vals = np.abs(resid[None, :] + np.outer(cands, col)).max(axis=1)
    i = int(np.argmin(vals))
    return float(cands[i]), float(vals[i])


def _plane_min_exact(const, P, lo, hi):
    """Exact min over (u, v) in the box of max_i |const_i + P_i . (u, v)|.

    Complete candidate set for a 2-D max-of-|affine| minimum: box corners,
    the four edges (1-D exact), and every interior point where three signed
    pieces are equal (two-active minima continue along equal-value lines to
    one of these).
    """
    m = P.shape[0]
    best_val = math.inf
    best_uv = (lo, lo)

    def consider(u, v):
        nonlocal best_val, best_uv
        u = min(max(u, lo), hi)
        v = min(max(v, lo), hi)
        val = float(np.abs(const + P[:, 0] * u + P[:, 1] * v).max())
        if val < best_val:
            best_val, best_uv = val, (u, v)

    for u in (lo, hi):
        for v in (lo, hi):
            consider(u, v)
    for fixed_axis, fixed in ((0, lo), (0, hi), (1, lo), (1, hi)):
        free = 1 - fixed_axis
        resid = const + P[:, fixed_axis] * fixed
        delta, _ = _line_min_exact(resid, P[:, free], lo, hi)
        consider(fixed if fixed_axis == 0 else delta, delta if fixed_axis == 0 else fixed)
    import itertools as it

    for i, j, k in it.combinations(range(m), 3):
        for sj in (1.0, -1.0):
            for sk in (1.0, -1.0):
                M = np.array(
                    [P[i] - sj * P[j], P[i] - sk * P[k]]
                )
                rhs = np.array([sj * const[j] - const[i], sk * const[k] - const[i]])
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                u, v = np.linalg.solve(M, rhs)
                consider(u, v)
    return best_uv, best_val


def grid_linf_oracle(A, b, lo, hi):
    """Grid-search oracle for min ||Ax - b||_inf over a box.

    A coarse grid scan supplies multistart points; each is polished to a
    pairwise-exact local minimum: exact line minimization per coordinate and
    exact 2-D minimization per coordinate pair (both solve the restricted
    piecewise-linear problems at their breakpoints).  Independent of the
    simplex code path.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, r = A.shape
    pts = {1: 201, 2: 41, 3: 17, 4: 11}.get(r, 7)
    axes = [np.linspace(lo, hi, pts)] * r
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, r)
    vals = np.abs(mesh @ A.T - b).max(axis=1)
    order = np.argsort(vals, kind="stable")[:60]
    best = float(vals[order[0]])
    pairs = list(__import__("itertools").combinations(range(r), 2))
    for idx in order:
        x = mesh[idx].copy()
        for _ in range(60):
            improved = False
            for t in range(r):
                resid = A @ x - b - A[:, t] * x[t]
                current = float(np.abs(resid + A[:, t] * x[t]).max())
                delta, val = _line_min_exact(resid, A[:, t], lo, hi)
                if val < current - 1e-14:
                    x[t] = delta
                    improved = True
            for s, t in pairs:
                resid = A @ x - b - A[:, s] * x[s] - A[:, t] * x[t]
                current = float(
                    np.abs(resid + A[:, s] * x[s] + A[:, t] * x[t]).max()
                )
                (u, v), val = _plane_min_exact(resid, A[:, (s, t)], lo, hi)
                if val < current - 1e-14:
                    x[s], x[t] = u, v
                    improved = True
            if not improved:
                break
        best = min(best, float(np.abs(A @ x - b).max()))
    return best


def grid_sigma_oracle(A):
    """Grid-search oracle for min over ||x||_inf = 1 of ||Ax||_inf.

    Searches each face x_j = 1 (sign symmetry makes that exhaustive); each
    face is the box-constrained regression handled by grid_linf_oracle.
    """
    A = np.asarray(A, float)
    r = A.shape[1]
    best = math.inf
    for j in range(r):
        rest = [c for c in range(r) if c != j]
        if rest:
            best = min(best, grid_linf_oracle(A[:, rest], -A[:, j], -1.0, 1.0))
        else:
            best = min(best, float(np.abs(A[:, j]).max()))
    return best


class TestLinfRegression:
    def test_identity(self):
        res = linf_regression(np.eye(2), [1.0, 2.0], box=(-10.0, 10.0))
        assert np.allclose(res.solution, [1, 2])
        assert res.residual == pytest.approx(0.0, abs=1e-12)

    def test_single_column(self):
        res = linf_regression(np.ones((3, 1)), [0.0, 1.0, 2.0], box=(-10.0, 10.0))
        assert res.solution[0] == pytest.approx(1.0, abs=1e-9)
        assert res.residual == pytest.approx(1.0, abs=1e-9)
        oracle = grid_linf_oracle(np.ones((3, 1)), np.array([0.0, 1.0, 2.0]), -10, 10)
        assert res.residual == pytest.approx(oracle, abs=1e-3)

    def test_box_clamp(self):
        res = linf_regression(np.array([[1.0]]), [2.0], box=(-1.0, 1.0))
        assert res.solution[0] == pytest.approx(1.0)
        assert res.residual == pytest.approx(1.0)

    def test_infeasible_box(self):
        with pytest.raises(LPError):
            linf_regression(np.eye(2), [0.0, 0.0], box=(1.0, -1.0))

    def test_residual_dominates_probes(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            A = rng.normal(size=(6, 3))
            b = rng.normal(size=6)
            res = linf_regression(A, b, box=(-1.0, 1.0))
            for _ in range(20):
                probe = rng.uniform(-1, 1, size=3)
                assert res.residual <= np.abs(A @ probe - b).max() + 1e-9

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            m = int(rng.integers(2, 7))
            r = int(rng.integers(1, 4))
            A = rng.normal(size=(m, r))
            b = rng.normal(size=m)
            res = linf_regression(A, b, box=(-1.0, 1.0))
            assert res.residual <= grid_linf_oracle(A, b, -1, 1) + 1e-6

    def test_perturbation_bound(self):
        # ||x* - x||_inf <= 2 ||Ax - b||_inf / sigma_inf_min(A) for feasible x.
        rng = np.random.default_rng(11)
        for _ in range(40):
            A = rng.normal(size=(5, 3)) + np.eye(5, 3) * 2.0
            x_true = rng.uniform(-0.5, 0.5, size=3)
            b = A @ x_true + rng.normal(scale=0.01, size=5)
            res = linf_regression(A, b, box=(-1.0, 1.0))
            sigma = sigma_inf_min(A)
            bound = 2.0 * np.abs(A @ x_true - b).max() / sigma
            assert np.abs(res.solution - x_true).max() <= bound + 1e-9


class TestSigmaInfMin:
    def test_identity(self):
        assert sigma_inf_min(np.eye(4)) == pytest.approx(1.0, abs=1e-9)

    def test_e1_e2_sum(self):
        A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        oracle = grid_sigma_oracle(A)
        assert sigma_inf_min(A) == pytest.approx(1.0, abs=1e-9)
        assert abs(sigma_inf_min(A) - oracle) <= 1e-2

    def test_duplicate_columns(self):
        A = np.array([[1.0, 1.0], [0.3, 0.3], [0.7, 0.7]])
        assert sigma_inf_min(A) == pytest.approx(0.0, abs=1e-9)

    def test_matches_grid(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            A = rng.normal(size=(4, 3))
            value = sigma_inf_min(A)
            assert value == pytest.approx(grid_sigma_oracle(A), abs=1e-3)
            assert value == pytest.approx(vertex_sigma_oracle(A), abs=1e-7)

    def test_witness(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(5, 3))
        value, x = sigma_inf_min_witness(A)
        assert np.abs(x).max() == pytest.approx(1.0)
        assert np.abs(A @ x).max() == pytest.approx(value, abs=1e-9)


class TestEntrywiseAndMomentRows:
    def test_empty_product(self):
        assert np.array_equal(entrywise_product([], length=3), np.ones(3))

    def test_orthogonal(self):
        assert np.array_equal(entrywise_product([[1, 0], [0, 1]]), [0, 0])

    def test_values(self):
        assert np.allclose(entrywise_product([[0.5, 1], [0.5, 0]]), [0.25, 0])

    def test_mismatch(self):
        with pytest.raises(LPError):
            entrywise_product([[1, 2], [1, 2, 3]])

    def test_moment_rows_empty_set(self):
        m = np.array([[1.0, 0.0], [0.5, 1.0]])
        rows = moment_rows(m, [()])
        assert np.array_equal(rows, [[1.0, 1.0]])

    def test_moment_rows_single(self):
        m = np.array([[1.0, 0.0]])
        assert np.array_equal(moment_rows(m, [(0,)]), [[1.0, 0.0]])

    def test_moment_rows_pair(self):
        m = np.array([[0.5, 1.0], [1.0, 0.5]])
        assert np.allclose(moment_rows(m, [(0, 1)]), [[0.5, 0.5]])


class TestBarycentricSpanner:
    def test_standard(self):
        res = barycentric_spanner([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        assert res.indices == (0, 1)
        assert np.allclose(res.coefficients[2], [0.5, 0.5])

    def test_single_vector(self):
        res = barycentric_spanner([[2.0, 1.0]])
        assert res.indices == (0,)
        assert np.allclose(res.coefficients, [[1.0]])

    def test_all_equal(self):
        res = barycentric_spanner([[1.0, 1.0]] * 3)
        assert res.indices == (0,)
        assert np.allclose(res.coefficients, 1.0)

    def test_coefficients_bounded(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            V = rng.normal(size=(8, 3))
            res = barycentric_spanner(V)
            assert np.abs(res.coefficients).max() <= 1.0 + 1e-9
            B = V[list(res.indices)]
            recon = res.coefficients @ B
            assert np.abs(recon - V).max() <= 1e-6

    def test_exchange_path(self):
        rng = np.random.default_rng(17)
        V = rng.normal(size=(30, 3))
        res = barycentric_spanner(V, max_exhaustive=10)
        assert np.abs(res.coefficients).max() <= 1.0 + 1e-6

    def test_rank_deficient(self):
        V = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        res = barycentric_spanner(V)
        assert len(res.indices) == 1
        assert np.abs(res.coefficients).max() <= 1.0 + 1e-9


class TestVandermondeKernel:
    def test_m2(self):
        assert vandermonde_kernel(2).tolist() == [-2, 1]

    def test_m3_orthogonality(self):
        v = vandermonde_kernel(3)
        assert v.tolist() == [-3, 3, -1]
        assert np.dot([1, 2, 3], v) == 0
        assert np.dot([1, 4, 9], v) == 0

    def test_m1(self):
        assert vandermonde_kernel(1).tolist() == [-1]

    @given(st.integers(min_value=1, max_value=12))
    @settings(max_examples=12, deadline=None)
    def test_kernel_property(self, m):
        v = vandermonde_kernel(m).astype(float)
        lam = 1.0
        nodes = np.arange(1, m + 1) * lam
        for d in range(1, m):
            assert abs(np.dot(nodes**d, v)) < 1e-6 * max(1, np.abs(nodes**d).max())


class TestSubcubeConditionBound:
    def test_condition_number_floor(self):
        # Full-column-rank {0,1/2,1} moment-row matrices built from products of
        # fewer than 2 log2 k rows stay polynomially conditioned (practical
        # constant c calibrated here: sigma >= k^{-c k} with c = 2).
        from conftest import random_subcube_mixture, subsets_upto

        import math as _math

        checked = 0
        for seed in range(60):
            k = 2 + seed % 3
            model = random_subcube_mixture(8, k, seed)
            degree = max(1, _math.ceil(2 * _math.log2(k)))
            rows = moment_rows(model.marginals, list(subsets_upto(8, degree)))
            if np.linalg.matrix_rank(rows, tol=1e-9) < k:
                continue
            checked += 1
            assert sigma_inf_min(rows) >= k ** (-2.0 * k)
        assert checked >= 20
