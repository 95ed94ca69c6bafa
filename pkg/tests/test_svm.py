import numpy as np
import pytest

from sicerep.errors import (DegenerateLabels, DimensionError,
                            IndefiniteKernel, InvalidMatrix, StaleDuals)
from sicerep.integration import BlockCache, WeightsBeta, WeightsM
from sicerep.svm import (gradient_weights, pair_gradient_coefficients,
                         project_simplex, radius_kkt_violation,
                         radius_margin_objective, solve_radius, solve_svm_l2,
                         svm_kkt_violation)

from oracles import radius_grid_search, svm_dual_oracle


def random_kernel_gram(rng, n, rank=None):
    rank = rank if rank is not None else n
    a = rng.standard_normal((n, rank))
    g = a @ a.T / rank
    d = np.sqrt(np.diag(g))
    g = g / np.outer(d, d)  # unit diagonal, kernel-like
    return (g + g.T) / 2.0


def test_project_simplex_examples():
    assert np.allclose(project_simplex([0.6, 0.6]), [0.5, 0.5])
    assert np.allclose(project_simplex([1.2, -0.2]), [1.0, 0.0])
    feasible = np.array([0.3, 0.2, 0.5])
    assert np.array_equal(project_simplex(feasible), feasible)
    again = project_simplex(project_simplex([3.0, -1.0, 0.4]))
    assert abs(again.sum() - 1.0) <= 1e-12 and np.all(again >= 0.0)


def test_project_simplex_matrix_symmetrizes():
    out = project_simplex(np.array([[0.5, 0.3], [0.1, 0.1]]))
    assert np.array_equal(out, out.T)
    assert abs(out.sum() - 1.0) <= 1e-12


def test_project_simplex_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        project_simplex(np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        project_simplex(np.zeros((2, 2, 2)))


def test_radius_two_point_closed_form():
    k = np.array([[1.0, 0.5], [0.5, 1.0]])
    sol = solve_radius(k, tol=1e-12)
    assert np.abs(sol.alpha - 0.5).max() <= 1e-10
    assert abs(sol.r_squared - 0.25) <= 1e-10
    assert radius_kkt_violation(k, sol) <= 1e-10


def test_radius_identical_points():
    k = np.full((5, 5), 0.73)
    sol = solve_radius(k, tol=1e-12)
    assert sol.r_squared <= 1e-12


def test_radius_matches_grid_search_oracle():
    rng = np.random.default_rng(77)
    a = rng.standard_normal((6, 4))
    k = a @ a.T / 4 + 0.5 * np.eye(6)
    sol = solve_radius(k, tol=1e-12)
    oracle_val, _ = radius_grid_search(k)
    assert abs(sol.r_squared - oracle_val) <= 1e-4


def test_radius_kkt_conditions_on_random_grams():
    rng = np.random.default_rng(1)
    for _ in range(10):
        k = random_kernel_gram(rng, int(rng.integers(3, 12)))
        sol = solve_radius(k, tol=1e-9)
        assert radius_kkt_violation(k, sol) <= 1e-8
        assert abs(sol.alpha.sum() - 1.0) <= 1e-12
        assert np.all(sol.alpha >= 0.0)


def test_radius_rejects_indefinite():
    k = np.array([[1.0, 0.9], [0.9, -0.5]])
    with pytest.raises((IndefiniteKernel, InvalidMatrix)):
        solve_radius(k)


def test_svm_two_point_closed_form():
    g = np.array([[1.0, 0.5], [0.5, 1.0]])
    dual = solve_svm_l2(g, [1, -1], np.inf, tol=1e-12)
    assert np.abs(dual.eta - 2.0).max() <= 1e-10
    assert abs(dual.w_norm_squared - 4.0) <= 1e-10
    assert abs(dual.bias) <= 1e-10
    assert svm_kkt_violation(g, [1, -1], np.inf, dual) <= 1e-10


def test_svm_duplicated_points_same_margin():
    # ridgeless case: duplicating every point leaves the dual unchanged
    g = np.array([[1.0, 0.5], [0.5, 1.0]])
    y = np.array([1, -1])
    base = solve_svm_l2(g, y, np.inf, tol=1e-10)
    idx = np.r_[np.arange(2), np.arange(2)]
    dup = solve_svm_l2(g[np.ix_(idx, idx)], y[idx], np.inf, tol=1e-10)
    assert abs(base.w_norm_squared - dup.w_norm_squared) <= 1e-6
    # with a ridge, splitting multipliers across copies halves the slack
    # cost per original point: duplicated at C equals the original at 2C
    rng = np.random.default_rng(2)
    g6 = random_kernel_gram(rng, 6)
    y6 = np.array([1, 1, 1, -1, -1, -1])
    idx6 = np.r_[np.arange(6), np.arange(6)]
    dup6 = solve_svm_l2(g6[np.ix_(idx6, idx6)], y6[idx6], 10.0, tol=1e-10)
    equiv = solve_svm_l2(g6, y6, 20.0, tol=1e-10)
    assert abs(dup6.w_norm_squared - equiv.w_norm_squared) <= 1e-6


def test_svm_matches_projected_gradient_oracle():
    rng = np.random.default_rng(5)
    b = rng.standard_normal((8, 5))
    g = b @ b.T / 5
    y = np.array([1, 1, 1, 1, -1, -1, -1, -1], dtype=float)
    c = 10.0
    dual = solve_svm_l2(g, y, c, tol=1e-12)
    _, oracle_obj, _ = svm_dual_oracle(g + np.eye(8) / c, y)
    assert abs(dual.w_norm_squared / 2.0 - oracle_obj) <= 1e-5


def test_svm_kkt_on_random_problems():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(4, 14))
        g = random_kernel_gram(rng, n)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        dual = solve_svm_l2(g, y, 10.0, tol=1e-9)
        assert svm_kkt_violation(g, y, 10.0, dual) <= 1e-8
        assert abs(dual.eta @ y) <= 1e-8
        assert np.all(dual.eta >= 0.0)


def test_svm_rejects_single_class():
    g = np.eye(3)
    with pytest.raises(DegenerateLabels):
        solve_svm_l2(g, [1, 1, 1], 1.0)


def test_svm_margin_monotone_in_c():
    rng = np.random.default_rng(4)
    for seed in range(5):
        r = np.random.default_rng(100 + seed)
        g = random_kernel_gram(r, 8)
        y = np.array([1, 1, 1, 1, -1, -1, -1, -1], dtype=float)
        objs = [solve_svm_l2(g, y, c, tol=1e-10).w_norm_squared / 2.0
                for c in (0.1, 1.0, 10.0, 100.0)]
        # dual optimum is nonincreasing as the ridge 1/c shrinks?  No:
        # shrinking the ridge grows the feasible objective, so it is
        # nondecreasing in c
        assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))


def _toy_cache_two_points():
    """Depth-1 cache over two samples with base kernel [[1, .5], [.5, 1]]."""
    blocks = np.array([[[1.0]], [[0.5]], [[1.0]]])
    return BlockCache(blocks, n=2, depth=1, gamma=1.0)


def test_radius_margin_objective_two_point_composition():
    cache = _toy_cache_two_points()
    j, radius, dual = radius_margin_objective(
        WeightsBeta((1.0,)), cache, [1, -1], np.inf, tol=1e-12)
    assert abs(j - 1.0) <= 1e-9
    assert abs(radius.r_squared - 0.25) <= 1e-10
    assert abs(dual.w_norm_squared - 4.0) <= 1e-10


def test_radius_margin_objective_nonnegative(small_hierarchies):
    hiers, labels = small_hierarchies
    from sicerep.spd import KernelConfig
    cache = BlockCache.from_hierarchies(hiers, KernelConfig(0.8))
    y = [1 if l == "c0" else -1 for l in labels]
    rng = np.random.default_rng(6)
    for _ in range(5):
        beta = WeightsBeta(project_simplex(rng.random(10)))
        j, _, _ = radius_margin_objective(beta, cache, y, 10.0)
        assert j >= 0.0


def test_radius_margin_scaling_leaves_argmin_unchanged(small_hierarchies):
    hiers, labels = small_hierarchies
    from sicerep.spd import KernelConfig
    cache = BlockCache.from_hierarchies(hiers, KernelConfig(0.8))
    y = [1 if l == "c0" else -1 for l in labels]
    rng = np.random.default_rng(7)
    candidates = [WeightsBeta(project_simplex(rng.random(10))) for _ in range(6)]
    scaled = BlockCache(3.0 * cache.blocks, cache.n, cache.depth, cache.gamma)

    js = [radius_margin_objective(b, cache, y, np.inf, tol=1e-10)[0]
          for b in candidates]
    js_scaled = [radius_margin_objective(b, scaled, y, np.inf, tol=1e-10)[0]
                 for b in candidates]
    assert int(np.argmin(js)) == int(np.argmin(js_scaled))
    # R^2 scales linearly with the kernel
    for b in candidates[:2]:
        _, r1, _ = radius_margin_objective(b, cache, y, np.inf, tol=1e-10)
        _, r3, _ = radius_margin_objective(b, scaled, y, np.inf, tol=1e-10)
        assert abs(r3.r_squared - 3.0 * r1.r_squared) <= 1e-8 * max(1.0, r3.r_squared)


def test_gradient_rejects_stale_duals():
    cache = _toy_cache_two_points()
    j, radius, dual = radius_margin_objective(
        WeightsBeta((1.0,)), cache, [1, -1], np.inf, tol=1e-12)
    broken = type(radius)(alpha=np.array([0.9, 0.3]), r_squared=radius.r_squared)
    with pytest.raises(StaleDuals):
        gradient_weights(WeightsBeta((1.0,)), cache, [1, -1], np.inf, broken, dual)


def test_gradient_symmetry_on_identical_levels(small_hierarchies):
    hiers, labels = small_hierarchies
    # all levels identical: every block is constant across level pairs
    from sicerep.represent import SiceHierarchy
    flat = []
    for h in hiers:
        lvl = h.levels[4]
        flat.append(SiceHierarchy((lvl,) * 3, (0.1, 0.2, 0.3), h.sample_id))
    from sicerep.spd import KernelConfig
    cache = BlockCache.from_hierarchies(flat, KernelConfig(0.8))
    y = [1 if l == "c0" else -1 for l in labels]
    w = WeightsBeta(np.full(3, 1.0 / 3.0))
    j, radius, dual = radius_margin_objective(w, cache, y, 10.0, tol=1e-12)
    grad = gradient_weights(w, cache, y, 10.0, radius, dual)
    assert np.abs(grad - grad.mean()).max() <= 1e-9 * max(1.0, np.abs(grad).max())


def test_gradient_matches_finite_differences(small_hierarchies):
    hiers, labels = small_hierarchies
    from sicerep.spd import KernelConfig
    cache = BlockCache.from_hierarchies(hiers, KernelConfig(0.8))
    y = [1 if l == "c0" else -1 for l in labels]
    rng = np.random.default_rng(8)
    h = 1e-5

    def raw_j_beta(vec):
        packed = np.einsum("i,pij,j->p", vec, cache.blocks, vec)
        iu = np.triu_indices(cache.n)
        gram = np.empty((cache.n, cache.n))
        gram[iu] = packed
        gram[(iu[1], iu[0])] = packed
        r = solve_radius(gram, tol=1e-12)
        d = solve_svm_l2(gram, y, 10.0, tol=1e-12)
        return r.r_squared * d.w_norm_squared

    for _ in range(3):
        b0 = project_simplex(rng.random(10)) + 1e-3
        b0 /= b0.sum()
        w = WeightsBeta(b0)
        _, radius, dual = radius_margin_objective(w, cache, y, 10.0, tol=1e-12)
        grad = gradient_weights(w, cache, y, 10.0, radius, dual)
        for t in (0, 4, 9):
            bp = b0.copy(); bp[t] += h
            bm = b0.copy(); bm[t] -= h
            fd = (raw_j_beta(bp) - raw_j_beta(bm)) / (2 * h)
            rel = abs(fd - grad[t]) / max(abs(fd), abs(grad[t]), 1e-8)
            assert rel <= 1e-4


def test_m_gradient_chain_rule_on_rank_one(small_hierarchies):
    hiers, labels = small_hierarchies
    from sicerep.spd import KernelConfig
    cache = BlockCache.from_hierarchies(hiers, KernelConfig(0.8))
    y = [1 if l == "c0" else -1 for l in labels]
    rng = np.random.default_rng(9)
    b0 = project_simplex(rng.random(10)) + 1e-3
    b0 /= b0.sum()
    m0 = np.outer(b0, b0)

    wb = WeightsBeta(b0)
    _, radius_b, dual_b = radius_margin_objective(wb, cache, y, 10.0, tol=1e-12)
    grad_b = gradient_weights(wb, cache, y, 10.0, radius_b, dual_b)

    wm = WeightsM(m0)
    _, radius_m, dual_m = radius_margin_objective(wm, cache, y, 10.0, tol=1e-12)
    grad_m = gradient_weights(wm, cache, y, 10.0, radius_m, dual_m)

    # dJ/dbeta_t = <dJ/dM, e_t beta' + beta e_t'> = ((G + G')beta)_t
    chained = (grad_m + grad_m.T) @ b0
    assert np.abs(chained - grad_b).max() <= 1e-8 * max(1.0, np.abs(grad_b).max())


def test_pair_gradient_coefficient_shapes():
    cache = _toy_cache_two_points()
    _, radius, dual = radius_margin_objective(
        WeightsBeta((1.0,)), cache, [1, -1], np.inf, tol=1e-12)
    coeff = pair_gradient_coefficients([1, -1], radius, dual)
    assert coeff.shape == (2, 2)
    assert np.abs(coeff - coeff.T).max() <= 1e-12
