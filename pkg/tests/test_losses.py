import numpy as np
import pytest

from netlasso.losses import (
    CustomLoss,
    Quadratic,
    RidgeRegression,
    SquaredDistance,
    sum_loss_minimizer,
)


def fd_gradient(loss, i, x, step=1e-6):
    """Central-difference gradient oracle."""
    g = np.empty(loss.dim)
    for c in range(loss.dim):
        e = np.zeros(loss.dim)
        e[c] = step
        g[c] = (loss.value(i, x + e) - loss.value(i, x - e)) / (2 * step)
    return g


def random_quadratic(rng, n, p, alpha_min=0.3):
    """Random strictly convex quadratic losses."""
    A = np.empty((n, p, p))
    for i in range(n):
        M = rng.normal(size=(p, p))
        A[i] = M @ M.T + alpha_min * np.eye(p)
    B = rng.normal(size=(n, p))
    return Quadratic(A, B)


class TestValues:
    def test_squared_distance_zero_at_anchor(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(6, 3))
        loss = SquaredDistance(pts)
        for i in range(6):
            assert loss.value(i, pts[i]) == 0.0

    def test_ridge_value(self):
        loss = RidgeRegression([0.0], [0.0], epsilon=1e-2)
        assert loss.value(0, np.array([0.0, 1.0])) == pytest.approx(0.005)

    def test_quadratic_value(self):
        loss = Quadratic(np.eye(2)[None], np.zeros((1, 2)))
        assert loss.value(0, np.array([3.0, 4.0])) == pytest.approx(12.5)

    def test_total_value_matches_per_node_sum(self):
        rng = np.random.default_rng(1)
        for loss in [SquaredDistance(rng.normal(size=(5, 2))),
                     RidgeRegression(rng.normal(size=5), rng.normal(size=5)),
                     random_quadratic(rng, 5, 2)]:
            X = rng.normal(size=(5, loss.dim))
            per_node = sum(loss.value(i, X[i]) for i in range(5))
            assert loss.total_value(X) == pytest.approx(per_node, rel=1e-12)


class TestGradients:
    def test_squared_distance_gradient_at_anchor(self):
        pts = np.random.default_rng(2).normal(size=(4, 2))
        loss = SquaredDistance(pts)
        np.testing.assert_allclose(loss.gradient(1, pts[1]), 0.0)

    def test_all_families_match_finite_differences(self):
        rng = np.random.default_rng(3)
        for loss in [SquaredDistance(rng.normal(size=(4, 3))),
                     RidgeRegression(rng.normal(size=4), rng.normal(size=4)),
                     random_quadratic(rng, 4, 3)]:
            for i in range(4):
                x = rng.normal(size=loss.dim)
                np.testing.assert_allclose(loss.gradient(i, x),
                                           fd_gradient(loss, i, x),
                                           atol=1e-6)

    def test_total_gradient_matches_stacked(self):
        rng = np.random.default_rng(4)
        loss = RidgeRegression(rng.normal(size=6), rng.normal(size=6))
        X = rng.normal(size=(6, 2))
        stacked = np.stack([loss.gradient(i, X[i]) for i in range(6)])
        np.testing.assert_allclose(loss.total_gradient(X), stacked)


class TestCurvature:
    def test_squared_distance_constants(self):
        loss = SquaredDistance(np.zeros((3, 2)))
        assert loss.smoothness(0) == 1.0
        assert loss.strong_convexity(0) == 1.0

    def test_quadratic_diag(self):
        loss = Quadratic(np.diag([2.0, 5.0])[None], np.zeros((1, 2)))
        assert loss.smoothness(0) == pytest.approx(5.0)
        assert loss.strong_convexity(0) == pytest.approx(2.0)

    def test_ridge_constants_match_eig_oracle(self):
        loss = RidgeRegression([0.0], [1.0], epsilon=1e-2)
        H = np.array([[1.0, 0.0], [0.0, 0.01]])
        lo, hi = np.linalg.eigvalsh(H)
        assert loss.smoothness(0) == pytest.approx(hi, rel=1e-12)
        assert loss.strong_convexity(0) == pytest.approx(lo, rel=1e-12)

    def test_ridge_alpha_small_but_positive(self):
        loss = RidgeRegression([1.0], [0.0], epsilon=1e-2)
        alpha = loss.strong_convexity(0)
        oracle = np.linalg.eigvalsh(np.array([[1.0, 1.0], [1.0, 1.01]]))[0]
        assert alpha == pytest.approx(oracle, rel=1e-12)
        assert 0.0 < alpha < 1e-2

    def test_plain_least_squares_reports_zero_alpha(self):
        loss = RidgeRegression([1.0, 2.0], [0.5, 0.5], epsilon=0.0)
        assert loss.strong_convexity(0) == 0.0
        assert loss.minimizer(0) is None

    def test_smoothness_upper_bound_property(self):
        # |f(y) - f(x) - grad(x).(y - x)| <= L/2 ||y - x||^2
        rng = np.random.default_rng(5)
        for loss in [SquaredDistance(rng.normal(size=(4, 2))),
                     RidgeRegression(rng.normal(size=4), rng.normal(size=4)),
                     random_quadratic(rng, 4, 2)]:
            for i in range(4):
                L = loss.smoothness(i)
                for _ in range(20):
                    x = rng.normal(size=loss.dim)
                    y = rng.normal(size=loss.dim)
                    gap = loss.value(i, y) - loss.value(i, x) \
                        - float(loss.gradient(i, x) @ (y - x))
                    assert abs(gap) <= 0.5 * L * float((y - x) @ (y - x)) + 1e-9

    def test_strong_convexity_lower_bound_property(self):
        rng = np.random.default_rng(6)
        for loss in [SquaredDistance(rng.normal(size=(4, 2))),
                     RidgeRegression(rng.normal(size=4), rng.normal(size=4)),
                     random_quadratic(rng, 4, 2)]:
            for i in range(4):
                a = loss.strong_convexity(i)
                for _ in range(20):
                    x = rng.normal(size=loss.dim)
                    y = rng.normal(size=loss.dim)
                    gap = loss.value(i, y) - loss.value(i, x) \
                        - float(loss.gradient(i, x) @ (y - x))
                    assert gap >= 0.5 * a * float((y - x) @ (y - x)) - 1e-9


class TestMinimizers:
    def test_squared_distance(self):
        pts = np.random.default_rng(7).normal(size=(3, 2))
        loss = SquaredDistance(pts)
        np.testing.assert_allclose(loss.minimizer(2), pts[2])

    def test_quadratic_closed_form(self):
        loss = Quadratic(2 * np.eye(2)[None], np.array([[2.0, 4.0]]))
        np.testing.assert_allclose(loss.minimizer(0), [1.0, 2.0])

    def test_ridge_minimizer_is_intercept_only(self):
        rng = np.random.default_rng(8)
        loss = RidgeRegression(rng.normal(size=5), rng.normal(size=5),
                               epsilon=1e-2)
        for i in range(5):
            m = loss.minimizer(i)
            np.testing.assert_allclose(m, [loss.responses[i], 0.0])
            assert np.linalg.norm(loss.gradient(i, m)) <= 1e-12

    def test_minimizer_gradient_is_zero(self):
        rng = np.random.default_rng(9)
        loss = random_quadratic(rng, 5, 3)
        for i in range(5):
            g = loss.gradient(i, loss.minimizer(i))
            assert np.linalg.norm(g) <= 1e-10


class TestSumLossMinimizer:
    def test_squared_distance_gives_mean(self):
        rng = np.random.default_rng(10)
        pts = rng.normal(size=(7, 2))
        loss = SquaredDistance(pts)
        sub = [1, 3, 4]
        np.testing.assert_allclose(sum_loss_minimizer(loss, sub),
                                   pts[sub].mean(axis=0), rtol=1e-12)

    def test_singleton_equals_minimizer(self):
        rng = np.random.default_rng(11)
        loss = random_quadratic(rng, 4, 2)
        np.testing.assert_allclose(sum_loss_minimizer(loss, [2]),
                                   loss.minimizer(2), rtol=1e-10)

    def test_quadratic_matches_dense_solve_oracle(self):
        rng = np.random.default_rng(12)
        loss = random_quadratic(rng, 6, 3)
        sub = [0, 2, 5]
        oracle = np.linalg.solve(loss.A[sub].sum(axis=0),
                                 loss.B[sub].sum(axis=0))
        np.testing.assert_allclose(sum_loss_minimizer(loss, sub), oracle,
                                   rtol=1e-10)

    def test_rejects_non_strictly_convex_aggregate(self):
        loss = RidgeRegression([1.0, 1.0], [0.0, 1.0], epsilon=0.0)
        # identical inputs keep the aggregate Hessian singular
        with pytest.raises(ValueError):
            sum_loss_minimizer(loss, [0, 1])

    def test_least_squares_aggregate_becomes_solvable(self):
        # distinct inputs make the summed least-squares Hessian invertible
        loss = RidgeRegression([0.0, 1.0], [1.0, 3.0], epsilon=0.0)
        m = sum_loss_minimizer(loss, [0, 1])
        np.testing.assert_allclose(m, [1.0, 2.0], atol=1e-10)

    def test_rejects_empty_and_duplicate(self):
        loss = SquaredDistance(np.zeros((3, 1)))
        with pytest.raises(ValueError):
            sum_loss_minimizer(loss, [])
        with pytest.raises(ValueError):
            sum_loss_minimizer(loss, [1, 1])

    def test_custom_loss_numeric_path(self):
        pts = np.array([[1.0, 0.0], [3.0, 2.0]])
        loss = CustomLoss(
            2, 2,
            value_fn=lambda i, x: 0.5 * float((x - pts[i]) @ (x - pts[i])),
            gradient_fn=lambda i, x: x - pts[i],
            smoothness=1.0, strong_convexity=1.0)
        np.testing.assert_allclose(sum_loss_minimizer(loss, [0, 1]),
                                   pts.mean(axis=0), atol=1e-8)


class TestCustomLoss:
    def test_gradient_check_passes_for_consistent_callbacks(self):
        loss = CustomLoss(
            3, 2,
            value_fn=lambda i, x: float(np.cosh(x).sum()) + i,
            gradient_fn=lambda i, x: np.sinh(x),
            smoothness=10.0)
        assert loss.check_gradient(seed=0)

    def test_gradient_check_catches_wrong_gradient(self):
        loss = CustomLoss(
            1, 2,
            value_fn=lambda i, x: float(x @ x),
            gradient_fn=lambda i, x: x,  # off by a factor of 2
            smoothness=2.0)
        with pytest.raises(ValueError):
            loss.check_gradient(seed=0)


class TestValidation:
    def test_quadratic_requires_symmetry(self):
        A = np.array([[[1.0, 0.5], [0.0, 1.0]]])
        with pytest.raises(ValueError):
            Quadratic(A, np.zeros((1, 2)))

    def test_quadratic_requires_psd(self):
        A = np.array([[[1.0, 0.0], [0.0, -1.0]]])
        with pytest.raises(ValueError):
            Quadratic(A, np.zeros((1, 2)))

    def test_ridge_shape_mismatch(self):
        with pytest.raises(ValueError):
            RidgeRegression([1.0, 2.0], [1.0])

    def test_node_index_range(self):
        loss = SquaredDistance(np.zeros((3, 1)))
        with pytest.raises(IndexError):
            loss.value(3, np.zeros(1))
