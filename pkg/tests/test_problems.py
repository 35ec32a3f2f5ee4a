"""Problem generators: finite-difference oracles, declared bounds, determinism."""

import numpy as np
import pytest

from strarc import (
    EvaluationError,
    eval_full,
    make_convex_quadratic,
    make_indefinite_quadratic,
    make_nonconvex_regression,
)


def fd_gradient(problem, x, h=1e-5):
    """Central finite differences of the full value."""
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (eval_full(problem, x + e, "value") - eval_full(problem, x - e, "value")) / (2 * h)
    return g


def fd_hessian(problem, x, h=1e-5):
    """Central finite differences of the full gradient."""
    d = x.size
    H = np.zeros((d, d))
    for j in range(d):
        e = np.zeros_like(x)
        e[j] = h
        H[:, j] = (eval_full(problem, x + e, "gradient") - eval_full(problem, x - e, "gradient")) / (2 * h)
    return (H + H.T) / 2


def box_points(problem, seed, count):
    rng = np.random.default_rng(seed)
    r = problem.constants.box_radius
    return rng.uniform(-r, r, size=(count, problem.d)) * 0.5


PROBLEMS = [
    make_indefinite_quadratic(seed=3, n=40, d=6, curvature_spread=1.0),
    make_convex_quadratic(seed=4, n=30, d=5),
    make_nonconvex_regression(seed=5, n=50, d=7, reg_weight=0.1),
]


@pytest.mark.parametrize("problem", PROBLEMS, ids=lambda p: p.name.split("(")[0])
class TestOracleConsistency:
    def test_gradient_matches_finite_differences(self, problem):
        for x in box_points(problem, 11, 5):
            g = eval_full(problem, x, "gradient")
            ref = fd_gradient(problem, x)
            assert np.linalg.norm(g - ref) <= 1e-5 * max(1.0, np.linalg.norm(ref))

    def test_hessian_matches_finite_differences(self, problem):
        for x in box_points(problem, 12, 3):
            H = eval_full(problem, x, "hessian")
            ref = fd_hessian(problem, x)
            assert np.linalg.norm(H - ref, 2) <= 1e-4 * max(1.0, np.linalg.norm(ref, 2))

    def test_component_hessians_symmetric(self, problem):
        x = box_points(problem, 13, 1)[0]
        hs = problem.hess_batch(problem.all_indices(), x)
        assert np.abs(hs - hs.transpose(0, 2, 1)).max() <= 1e-12

    def test_full_average_matches_component_mean(self, problem):
        x = box_points(problem, 14, 1)[0]
        vals = problem.value_batch(problem.all_indices(), x)
        full = eval_full(problem, x, "value")
        assert full == pytest.approx(vals.mean(), rel=1e-12)

    def test_declared_bounds_hold_on_box(self, problem):
        c = problem.constants
        idx = problem.all_indices()
        for x in box_points(problem, 15, 20):
            vals = problem.value_batch(idx, x)
            grads = problem.grad_batch(idx, x)
            hess = problem.hess_batch(idx, x)
            assert np.abs(vals).max() <= c.kappa_f + 1e-9
            assert np.linalg.norm(grads, axis=1).max() <= c.kappa_grad + 1e-9
            assert np.abs(np.linalg.eigvalsh(hess)).max() <= c.kappa_hess + 1e-9

    def test_variance_bounds_hold_on_box(self, problem):
        c = problem.constants
        idx = problem.all_indices()
        for x in box_points(problem, 16, 25):
            grads = problem.grad_batch(idx, x)
            dev_g = grads - grads.mean(axis=0)
            assert (np.linalg.norm(dev_g, axis=1) ** 2).mean() <= c.H1**2 + 1e-9
            hess = problem.hess_batch(idx, x)
            dev_h = hess - hess.mean(axis=0)
            assert (np.abs(np.linalg.eigvalsh(dev_h)).max(axis=1) ** 2).mean() <= c.H2**2 + 1e-9

    def test_same_seed_same_problem(self, problem):
        # regenerate with identical arguments and compare evaluator outputs
        name = problem.name
        if name.startswith("indefinite"):
            other = make_indefinite_quadratic(seed=3, n=40, d=6, curvature_spread=1.0)
        elif name.startswith("convex"):
            other = make_convex_quadratic(seed=4, n=30, d=5)
        else:
            other = make_nonconvex_regression(seed=5, n=50, d=7, reg_weight=0.1)
        x = box_points(problem, 17, 1)[0]
        idx = problem.all_indices()
        assert np.array_equal(problem.value_batch(idx, x), other.value_batch(idx, x))
        assert np.array_equal(problem.grad_batch(idx, x), other.grad_batch(idx, x))
        assert np.array_equal(problem.hess_batch(idx, x), other.hess_batch(idx, x))


class TestIndefiniteQuadratic:
    def test_mean_hessian_straddles_zero(self):
        p = make_indefinite_quadratic(seed=7, n=100, d=10, curvature_spread=1.0)
        eigs = np.linalg.eigvalsh(eval_full(p, np.zeros(10), "hessian"))
        assert eigs[0] < 0 < eigs[-1]

    def test_value_and_gradient_at_origin(self):
        p = make_indefinite_quadratic(seed=2, n=20, d=4, curvature_spread=1.0)
        assert eval_full(p, np.zeros(4), "value") == 0.0
        b_mean = p.grad_batch(p.all_indices(), np.zeros(4)).mean(axis=0)
        assert np.array_equal(eval_full(p, np.zeros(4), "gradient"), b_mean)

    def test_zero_sum_linear_terms_make_pure_saddle(self):
        p = make_indefinite_quadratic(seed=9, n=64, d=6, curvature_spread=1.0)
        assert np.all(p.grad_batch(p.all_indices(), np.zeros(6)).sum(axis=0) == 0.0)
        assert np.linalg.norm(eval_full(p, np.zeros(6), "gradient")) <= 1e-14
        zb = make_indefinite_quadratic(seed=9, n=64, d=6, curvature_spread=1.0, b_scale=0.0)
        assert np.all(eval_full(zb, np.zeros(6), "gradient") == 0.0)

    def test_dimension_one_rejected(self):
        with pytest.raises(ValueError):
            make_indefinite_quadratic(seed=1, n=5, d=1, curvature_spread=1.0)

    def test_nonpositive_spread_rejected(self):
        with pytest.raises(ValueError):
            make_indefinite_quadratic(seed=1, n=5, d=3, curvature_spread=0.0)


class TestNonconvexRegression:
    def test_separable_loss_vanishes_along_separator(self):
        p = make_nonconvex_regression(seed=21, n=40, d=5, reg_weight=0.0)
        idx = p.all_indices()
        # recover a separating direction from the labels via one logistic step
        g0 = eval_full(p, np.zeros(5), "gradient")
        x = -200.0 * g0 / np.linalg.norm(g0)
        # perfectly separable data drives the loss of the majority of
        # components toward zero along the separating direction
        vals_far = p.value_batch(idx, x)
        assert np.median(vals_far) < 1e-3

    def test_zeroed_labels_reduce_to_regularizer(self):
        p = make_nonconvex_regression(seed=22, n=30, d=4, reg_weight=0.5, zero_labels=True)
        # every component is log 2 plus the penalty, minimized at the origin
        assert np.all(eval_full(p, np.zeros(4), "gradient") == 0.0)
        assert eval_full(p, np.zeros(4), "value") == pytest.approx(np.log(2.0), rel=1e-12)
        rng = np.random.default_rng(0)
        for x in rng.normal(size=(5, 4)):
            assert p.component_value(3, x) >= p.component_value(3, np.zeros(4))

    def test_negative_reg_weight_rejected(self):
        with pytest.raises(ValueError):
            make_nonconvex_regression(seed=1, n=5, d=2, reg_weight=-0.1)


class TestEvalFull:
    def test_single_component_identity(self):
        p = make_convex_quadratic(seed=31, n=1, d=3)
        x = np.array([0.3, -0.2, 0.5])
        assert eval_full(p, x, "value") == pytest.approx(p.component_value(0, x), rel=1e-12)
        assert np.allclose(eval_full(p, x, "gradient"), p.component_grad(0, x), rtol=1e-12)

    def test_unknown_selector_rejected(self):
        p = make_convex_quadratic(seed=31, n=2, d=3)
        with pytest.raises(ValueError):
            eval_full(p, np.zeros(3), "jacobian")

    def test_nonfinite_component_reports_index(self):
        p = make_nonconvex_regression(seed=33, n=6, d=3, reg_weight=0.1)
        with np.errstate(invalid="ignore"), pytest.raises(EvaluationError) as err:
            p.value_batch(p.all_indices(), np.array([np.inf, 0.0, 0.0]))
        assert 0 <= err.value.index < 6
