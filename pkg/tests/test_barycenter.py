import numpy as np
import pytest

from wassgeo import (
    DiscreteMeasure,
    barycenter_fixed_support,
    barycenter_free_support,
    barycenter_multimarginal_exact,
    cost_matrix,
    sinkhorn,
    w2_squared,
)

from oracles import w1_distance_1d, wasserstein_1d


def gaussian_histogram(grid_points, mean, sigma):
    h = np.exp(-0.5 * ((grid_points - mean) / sigma) ** 2)
    return h / h.sum()


class TestFixedSupport:
    def test_single_histogram_blur_vanishes_with_epsilon(self):
        grid = np.arange(20.0)[None, :]
        hist = gaussian_histogram(np.arange(20.0), 9.0, 2.0)
        errs = []
        for eps in (1.0, 0.05):
            result = barycenter_fixed_support([hist], grid, epsilon=eps)
            errs.append(np.abs(result.weights - hist).sum())
        assert errs[1] < errs[0]
        assert errs[1] < 1e-3

    def test_two_identical_histograms(self):
        grid = np.arange(15.0)[None, :]
        hist = gaussian_histogram(np.arange(15.0), 7.0, 1.5)
        result = barycenter_fixed_support([hist, hist], grid, epsilon=0.05)
        assert np.abs(result.weights - hist).sum() < 1e-3

    def test_1d_quantile_average(self):
        # two shifted bumps: the barycenter's quantile function is the
        # average of the input quantile functions
        n = 60
        pts = np.arange(float(n))
        grid = pts[None, :]
        h1 = gaussian_histogram(pts, 15.0, 3.0)
        h2 = gaussian_histogram(pts, 39.0, 3.0)
        result = barycenter_fixed_support([h1, h2], grid, epsilon=1e-3)
        # oracle: monotone matching of the two inputs, atoms at midpoints
        _, entries = wasserstein_1d(pts, h1, pts, h2)
        ox = np.array([0.5 * (pts[i] + pts[j]) for i, j, _ in entries])
        ow = np.array([m for _, _, m in entries])
        err = w1_distance_1d(result.locations[0], result.weights, ox, ow)
        assert err <= 5e-2

    def test_objective_non_increasing(self):
        grid_pts = np.arange(10.0)
        grid = grid_pts[None, :]
        h1 = gaussian_histogram(grid_pts, 2.0, 1.0)
        h2 = gaussian_histogram(grid_pts, 7.0, 1.5)
        eps = 0.5
        _, history = barycenter_fixed_support(
            [h1, h2], grid, epsilon=eps, max_iter=40, tol=0.0, return_history=True
        )
        M = cost_matrix(grid, grid)

        def entropic_value(q):
            total = 0.0
            for h in (h1, h2):
                plan = sinkhorn(q, h, M, eps, tol=1e-12, max_iter=50_000)
                P = plan.matrix
                ent = np.where(P > 0, P * (np.log(P, where=P > 0) - 1.0), 0.0).sum()
                total += 0.5 * (plan.transport_cost + eps * ent)
            return total

        values = [entropic_value(q / q.sum()) for q in history[1:8]]
        assert all(b <= a + 1e-10 for a, b in zip(values, values[1:]))

    def test_input_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            barycenter_fixed_support(np.zeros((0, 4)), np.zeros((1, 4)), 0.1)
        with pytest.raises(ValueError, match="bins"):
            barycenter_fixed_support([np.ones(3) / 3], np.zeros((1, 4)), 0.1)


class TestFreeSupport:
    def test_recovers_single_input(self):
        rng = np.random.default_rng(0)
        m = DiscreteMeasure.uniform(rng.standard_normal((2, 3)))
        result = barycenter_free_support([m], p=3, epsilon=1e-3, seed=1)
        assert w2_squared(m, result) <= 1e-6

    def test_two_diracs_meet_in_the_middle(self):
        u = DiscreteMeasure.dirac([0.0, 0.0])
        v = DiscreteMeasure.dirac([4.0, 2.0])
        result = barycenter_free_support([u, v], p=1, epsilon=0.1, seed=0)
        assert result.locations[:, 0] == pytest.approx([2.0, 1.0], abs=1e-9)

    def test_close_to_multimarginal_optimum(self):
        shape = np.array([[0.0, 1.0], [0.0, 0.5]])
        shifts = [np.array([0.0, 0.0]), np.array([2.0, 0.0]), np.array([1.0, 1.5])]
        measures = [DiscreteMeasure.uniform(shape + s[:, None]) for s in shifts]
        exact = barycenter_multimarginal_exact(measures)
        approx = barycenter_free_support(
            measures, p=2, epsilon=1e-3, outer_iter=200, seed=3
        )
        obj_exact = np.mean([w2_squared(m, exact) for m in measures])
        obj_approx = np.mean([w2_squared(m, approx) for m in measures])
        assert obj_approx <= 1.05 * obj_exact + 1e-12

    def test_objective_history_non_increasing(self):
        rng = np.random.default_rng(4)
        measures = [
            DiscreteMeasure.uniform(rng.standard_normal((2, 4))) for _ in range(3)
        ]
        _, history = barycenter_free_support(
            measures, p=3, epsilon=0.05, outer_iter=25, seed=0, return_history=True
        )
        assert all(b <= a + 1e-7 for a, b in zip(history, history[1:]))

    def test_seed_reproducibility_bit_identical(self):
        rng = np.random.default_rng(5)
        measures = [
            DiscreteMeasure.uniform(rng.standard_normal((2, 5))) for _ in range(2)
        ]
        r1 = barycenter_free_support(measures, p=3, epsilon=0.05, seed=11)
        r2 = barycenter_free_support(measures, p=3, epsilon=0.05, seed=11)
        assert np.array_equal(r1.locations, r2.locations)
        assert np.array_equal(r1.weights, r2.weights)

    def test_validation(self):
        m = DiscreteMeasure.dirac([0.0])
        with pytest.raises(ValueError, match="at least one"):
            barycenter_free_support([], p=1, epsilon=0.1)
        with pytest.raises(ValueError, match="budget"):
            barycenter_free_support([m], p=5, epsilon=0.1)


class TestMultimarginalExact:
    def test_two_measure_midpoint_identity(self):
        rng = np.random.default_rng(6)
        m1 = DiscreteMeasure.uniform(rng.standard_normal((2, 3)))
        m2 = DiscreteMeasure.uniform(rng.standard_normal((2, 3)))
        bary = barycenter_multimarginal_exact([m1, m2])
        total = w2_squared(bary, m1) + w2_squared(bary, m2)
        assert total == pytest.approx(0.5 * w2_squared(m1, m2), abs=1e-8)

    def test_identical_measures_fixed_point(self):
        rng = np.random.default_rng(7)
        m = DiscreteMeasure.uniform(rng.standard_normal((2, 4)))
        bary = barycenter_multimarginal_exact([m, m, m])
        assert bary.n == m.n
        assert w2_squared(bary, m) == pytest.approx(0.0, abs=1e-12)

    def test_singleton_centroid(self):
        pts = [np.array([0.0, 0.0]), np.array([3.0, 0.0]), np.array([0.0, 3.0])]
        bary = barycenter_multimarginal_exact([DiscreteMeasure.dirac(p) for p in pts])
        assert bary.n == 1
        assert bary.locations[:, 0] == pytest.approx([1.0, 1.0])

    def test_tuple_cap(self):
        m = DiscreteMeasure.uniform(np.zeros((1, 10)))
        with pytest.raises(ValueError, match="cap"):
            barycenter_multimarginal_exact([m] * 3, max_tuples=100)


class TestTranslationEquivariance:
    def test_all_three_algorithms(self):
        rng = np.random.default_rng(8)
        tau = np.array([2.5, -1.0])
        shape = rng.standard_normal((2, 3))
        measures = [
            DiscreteMeasure.uniform(shape + s * np.array([[1.0], [0.3]]))
            for s in (-1.0, 0.0, 1.0)
        ]
        shifted = [m.translate(tau) for m in measures]

        exact = barycenter_multimarginal_exact(measures)
        exact_shifted = barycenter_multimarginal_exact(shifted)
        assert w2_squared(exact.translate(tau), exact_shifted) <= 1e-6

        free = barycenter_free_support(measures, p=3, epsilon=0.05, seed=2)
        free_shifted = barycenter_free_support(shifted, p=3, epsilon=0.05, seed=2)
        assert w2_squared(free.translate(tau), free_shifted) <= 1e-6

        grid_pts = np.arange(12.0)
        grid = np.stack([grid_pts, np.zeros_like(grid_pts)])
        h1 = gaussian_histogram(grid_pts, 3.0, 1.0)
        h2 = gaussian_histogram(grid_pts, 8.0, 1.0)
        fixed = barycenter_fixed_support([h1, h2], grid, epsilon=0.1)
        shift_vec = np.array([4.0, 1.0])
        fixed_shifted = barycenter_fixed_support(
            [h1, h2], grid + shift_vec[:, None], epsilon=0.1
        )
        assert w2_squared(fixed.translate(shift_vec), fixed_shifted) <= 1e-6
