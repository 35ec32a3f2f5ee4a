"""Subproblem solvers against closed forms, grid-search oracles, and each other."""

import math

import numpy as np
import pytest

from strarc import (
    CubicModel,
    QuadraticModel,
    cubic_cauchy_step,
    cubic_exact_step,
    model_decrease,
    smallest_eigenpair,
    tr_cauchy_step,
    tr_eigen_step,
    tr_exact_step,
)


def quad(g, B):
    return QuadraticModel(g=np.asarray(g, float), B=np.asarray(B, float))


def cubic(g, B, sigma):
    return CubicModel(quad(g, B), sigma)


def polar_grid_min(model, radius, n_r=1000, n_t=1000):
    """Minimum model value on a dense polar grid over the disk ||s|| <= radius (d = 2)."""
    r = np.linspace(0.0, radius, n_r)
    t = np.linspace(0.0, 2 * np.pi, n_t, endpoint=False)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    s1, s2 = rr * np.cos(tt), rr * np.sin(tt)
    g, B = model.g, model.B
    vals = (g[0] * s1 + g[1] * s2
            + 0.5 * (B[0, 0] * s1**2 + 2 * B[0, 1] * s1 * s2 + B[1, 1] * s2**2))
    if isinstance(model, CubicModel):
        vals = vals + model.sigma / 3.0 * rr**3
    return float(vals.min())


def zoom_grid_min(model, radius, levels=6, pts=31):
    """Refining grid search over the box [-radius, radius]^d (d <= 3)."""
    d = model.g.size
    center = np.zeros(d)
    width = radius
    best = model.value(center)
    for _ in range(levels):
        axes = [np.linspace(c - width, c + width, pts) for c in center]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts_mat = np.stack([m.ravel() for m in mesh], axis=1)
        vals = (pts_mat @ model.g
                + 0.5 * np.einsum("ki,ij,kj->k", pts_mat, model.B, pts_mat))
        if isinstance(model, CubicModel):
            vals = vals + model.sigma / 3.0 * np.linalg.norm(pts_mat, axis=1) ** 3
        j = int(np.argmin(vals))
        if vals[j] < best:
            best = float(vals[j])
            center = pts_mat[j]
        width *= 2.0 / (pts - 1)
    return best


def random_symmetric(rng, d, scale=1.0):
    m = rng.standard_normal((d, d)) * scale
    return (m + m.T) / 2.0


class TestTrCauchy:
    def test_scaled_interior_minimizer(self):
        out = tr_cauchy_step(quad([1.0, 0.0], np.eye(2)), delta=10.0)
        assert np.allclose(out.s, [-1.0, 0.0], atol=1e-12)
        assert out.model_decrease == pytest.approx(0.5, rel=1e-12)
        # bound met with equality here
        assert out.model_decrease >= 0.5 * 1.0 * min(10.0, 1.0) - 1e-12

    def test_zero_curvature_boundary_step(self):
        g = np.array([3.0, 4.0])
        out = tr_cauchy_step(quad(g, np.zeros((2, 2))), delta=1.0)
        assert np.allclose(out.s, -g / 5.0, atol=1e-12)
        assert out.model_decrease == pytest.approx(5.0, rel=1e-12)

    def test_negative_curvature_full_step(self):
        out = tr_cauchy_step(quad([1.0, 0.0], -np.eye(2)), delta=2.0)
        assert np.allclose(out.s, [-2.0, 0.0], atol=1e-12)
        assert out.model_decrease == pytest.approx(4.0, rel=1e-12)
        assert out.model_decrease >= 0.5 * 1.0 * min(2.0, 1.0)

    def test_zero_gradient_rejected(self):
        with pytest.raises(ValueError):
            tr_cauchy_step(quad([0.0, 0.0], np.eye(2)), delta=1.0)

    def test_decrease_bound_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            d = int(rng.integers(1, 9))
            g = rng.standard_normal(d)
            if np.linalg.norm(g) == 0:
                continue
            B = random_symmetric(rng, d, scale=float(rng.uniform(0.1, 3.0)))
            delta = float(rng.uniform(0.05, 5.0))
            out = tr_cauchy_step(quad(g, B), delta)
            gn = np.linalg.norm(g)
            bn = np.abs(np.linalg.eigvalsh(B)).max()
            bound = 0.5 * gn * min(delta, gn / bn if bn > 0 else np.inf)
            assert out.model_decrease >= bound - 1e-9 * max(1.0, bound)
            assert np.linalg.norm(out.s) <= delta + 1e-10


class TestTrEigen:
    def test_pure_curvature_step(self):
        out = tr_eigen_step(quad([0.0, 0.0], np.diag([1.0, -2.0])), delta=1.0)
        assert abs(out.s[1]) == pytest.approx(1.0, rel=1e-12)
        assert out.s[0] == pytest.approx(0.0, abs=1e-12)
        assert out.model_decrease == pytest.approx(1.0, rel=1e-12)

    def test_sign_follows_gradient(self):
        out = tr_eigen_step(quad([0.0, 3.0], np.diag([1.0, -2.0])), delta=1.0)
        assert np.allclose(out.s, [0.0, -1.0], atol=1e-12)
        assert out.model_decrease == pytest.approx(4.0, rel=1e-12)

    def test_curvature_term_scales_quadratically(self):
        m = quad([0.0, 0.0], np.diag([1.0, -2.0]))
        d1 = tr_eigen_step(m, delta=1.0).model_decrease
        d2 = tr_eigen_step(m, delta=2.0).model_decrease
        assert d2 == pytest.approx(4.0 * d1, rel=1e-12)

    def test_positive_definite_rejected(self):
        with pytest.raises(ValueError):
            tr_eigen_step(quad([1.0, 0.0], np.eye(2)), delta=1.0)

    def test_decrease_bound_on_random_instances(self):
        rng = np.random.default_rng(1)
        done = 0
        while done < 200:
            d = int(rng.integers(2, 9))
            B = random_symmetric(rng, d)
            lam = np.linalg.eigvalsh(B)[0]
            if lam >= 0:
                continue
            g = rng.standard_normal(d)
            delta = float(rng.uniform(0.05, 4.0))
            out = tr_eigen_step(quad(g, B), delta)
            assert float(g @ out.s) <= 1e-10
            assert out.model_decrease >= -0.5 * lam * delta**2 - 1e-10
            done += 1


class TestTrExact:
    def test_one_dimensional_boundary(self):
        out = tr_exact_step(quad([1.0], [[-1.0]]), delta=2.0)
        assert out.s[0] == pytest.approx(-2.0, rel=1e-10)
        assert out.model_decrease == pytest.approx(4.0, rel=1e-10)

    def test_interior_newton_step(self):
        B = np.diag([2.0, 4.0])
        g = np.array([1.0, -2.0])
        out = tr_exact_step(quad(g, B), delta=5.0)
        assert np.allclose(out.s, -np.linalg.solve(B, g), atol=1e-10)

    def test_hard_case_zero_gradient(self):
        out = tr_exact_step(quad([0.0, 0.0], np.diag([1.0, -2.0])), delta=1.5)
        assert np.linalg.norm(out.s) == pytest.approx(1.5, rel=1e-10)
        assert out.model_decrease == pytest.approx(0.5 * 2.0 * 1.5**2, rel=1e-10)

    def test_hard_case_orthogonal_gradient(self):
        # g lives entirely in the positive-curvature eigenspace
        B = np.diag([-1.0, 2.0])
        g = np.array([0.0, 0.5])
        out = tr_exact_step(quad(g, B), delta=3.0)
        assert np.linalg.norm(out.s) == pytest.approx(3.0, rel=1e-8)
        # stationarity of the boundary solution: (B + I) s = -g off the bottom eigenspace
        assert out.s[1] == pytest.approx(-0.5 / 3.0, rel=1e-8)

    def test_dominates_cauchy_and_eigen(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            d = int(rng.integers(1, 11))
            g = rng.standard_normal(d) * float(rng.uniform(0, 2))
            B = random_symmetric(rng, d, scale=float(rng.uniform(0.2, 2.0)))
            delta = float(rng.uniform(0.05, 4.0))
            model = quad(g, B)
            out = tr_exact_step(model, delta)
            assert np.linalg.norm(out.s) <= delta + 1e-10
            if np.linalg.norm(g) > 0:
                assert out.model_decrease >= tr_cauchy_step(model, delta).model_decrease - 1e-9
            lam = np.linalg.eigvalsh(B)[0]
            if lam < 0:
                assert out.model_decrease >= tr_eigen_step(model, delta).model_decrease - 1e-9

    def test_matches_polar_grid_in_model_value(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            g = rng.standard_normal(2)
            B = random_symmetric(rng, 2)
            delta = float(rng.uniform(0.2, 3.0))
            model = quad(g, B)
            out = tr_exact_step(model, delta)
            ref = polar_grid_min(model, delta, n_r=400, n_t=400)
            assert model.value(out.s) <= ref + 1e-4


class TestCubicCauchy:
    def test_scalar_example(self):
        out = cubic_cauchy_step(cubic([4.0], [[0.0]], sigma=1.0))
        assert out.s[0] == pytest.approx(-2.0, rel=1e-12)
        assert out.model_decrease == pytest.approx(16.0 / 3.0, rel=1e-12)
        assert out.model_decrease >= 0.1 * 4.0 * min(np.inf, math.sqrt(4.0))

    def test_alpha_formula(self):
        out = cubic_cauchy_step(cubic([1.0], [[1.0]], sigma=2.0))
        assert out.s[0] == pytest.approx(-0.5, rel=1e-12)  # alpha = 2 / (1 + 3)

    def test_large_sigma_shrinks_step(self):
        small = cubic_cauchy_step(cubic([1.0, 1.0], np.eye(2), sigma=1e8))
        assert np.linalg.norm(small.s) <= 1e-3

    def test_bounds_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            d = int(rng.integers(1, 9))
            g = rng.standard_normal(d)
            if np.linalg.norm(g) == 0:
                continue
            B = random_symmetric(rng, d)
            sigma = float(rng.uniform(0.05, 5.0))
            model = cubic(g, B, sigma)
            out = cubic_cauchy_step(model)
            gn = np.linalg.norm(g)
            bn = np.abs(np.linalg.eigvalsh(B)).max()
            dec_bound = 0.1 * gn * min(gn / bn if bn > 0 else np.inf, math.sqrt(gn / sigma))
            norm_bound = 2.75 * max(bn / sigma, math.sqrt(gn / sigma))
            assert out.model_decrease >= dec_bound - 1e-9 * max(1.0, dec_bound)
            assert np.linalg.norm(out.s) <= norm_bound + 1e-10


class TestCubicExact:
    def test_scalar_root(self):
        out = cubic_exact_step(cubic([1.0], [[0.0]], sigma=1.0))
        assert out.s[0] == pytest.approx(-1.0, rel=1e-10)
        assert all(out.conditions_ok)

    def test_hard_case_norm(self):
        out = cubic_exact_step(cubic([0.0, 0.0], np.diag([1.0, -2.0]), sigma=1.0))
        assert np.linalg.norm(out.s) == pytest.approx(2.0, rel=1e-10)
        assert out.s[0] == pytest.approx(0.0, abs=1e-12)
        assert all(out.conditions_ok)

    def test_newton_limit_small_sigma(self):
        B = np.diag([2.0, 3.0])
        g = np.array([0.4, -0.6])
        out = cubic_exact_step(cubic(g, B, sigma=1e-8))
        assert np.allclose(out.s, -np.linalg.solve(B, g), atol=1e-6)
        assert all(out.conditions_ok)

    def test_positive_definite_zero_gradient(self):
        out = cubic_exact_step(cubic([0.0, 0.0], np.eye(2), sigma=1.0))
        assert np.all(out.s == 0.0) and out.model_decrease == 0.0

    def test_conditions_on_random_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            d = int(rng.integers(1, 21))
            g = rng.standard_normal(d) * float(rng.uniform(0, 2))
            B = random_symmetric(rng, d)
            sigma = float(rng.uniform(0.05, 5.0))
            model = cubic(g, B, sigma)
            out = cubic_exact_step(model)
            s, sn = out.s, np.linalg.norm(out.s)
            r14 = float(g @ s) + float(s @ B @ s) + sigma * sn**3
            assert abs(r14) <= 1e-8 * (1.0 + np.linalg.norm(g) * sn)
            assert float(s @ B @ s) + sigma * sn**3 >= -1e-10
            if np.linalg.norm(g) > 0:
                assert model.value(out.s) <= model.value(cubic_cauchy_step(model).s) + 1e-9

    def test_matches_polar_grid_in_model_value(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            g = rng.standard_normal(2)
            B = random_symmetric(rng, 2)
            model = cubic(g, B, float(rng.uniform(0.2, 3.0)))
            out = cubic_exact_step(model)
            radius = 3.0 * max(np.linalg.norm(out.s), 0.3)
            ref = polar_grid_min(model, radius, n_r=400, n_t=400)
            assert model.value(out.s) <= ref + 1e-4

    def test_matches_zoom_grid_up_to_three_dims(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = int(rng.integers(1, 4))
            g = rng.standard_normal(d)
            B = random_symmetric(rng, d)
            model = cubic(g, B, float(rng.uniform(0.3, 2.0)))
            out = cubic_exact_step(model)
            radius = 3.0 * max(np.linalg.norm(out.s), 0.3)
            ref = zoom_grid_min(model, radius)
            assert model.value(out.s) <= ref + 1e-4


class TestModelDecrease:
    def test_zero_step(self):
        assert model_decrease(quad([1.0, 2.0], np.eye(2)), np.zeros(2)) == 0.0

    def test_hand_value(self):
        assert model_decrease(quad([1.0, 0.0], np.eye(2)), np.array([-1.0, 0.0])) == pytest.approx(0.5)

    def test_cubic_subtracts_regularization(self):
        s = np.array([0.5, -0.5])
        q = quad([1.0, 2.0], np.eye(2))
        c = CubicModel(q, sigma=3.0)
        extra = 3.0 / 3.0 * np.linalg.norm(s) ** 3
        assert model_decrease(c, s) == pytest.approx(model_decrease(q, s) - extra, rel=1e-12)


class TestSmallestEigenpair:
    def test_identity(self):
        lam, v = smallest_eigenpair(np.eye(3))
        assert lam == pytest.approx(1.0, rel=1e-12)
        assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-12)

    def test_diagonal(self):
        lam, v = smallest_eigenpair(np.diag([3.0, -5.0, 2.0]))
        assert lam == pytest.approx(-5.0, rel=1e-12)
        assert abs(v[1]) == pytest.approx(1.0, rel=1e-12)

    def test_random_against_dense(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            M = random_symmetric(rng, int(rng.integers(2, 30)))
            lam, v = smallest_eigenpair(M)
            assert lam == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-10)
            assert np.linalg.norm(M @ v - lam * v) <= 1e-10 * max(1.0, np.linalg.norm(M, 2))

    def test_lanczos_path_above_cutoff(self):
        rng = np.random.default_rng(9)
        M = random_symmetric(rng, 120)
        lam, v = smallest_eigenpair(M, lanczos_cutoff=100)
        assert lam == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-7)
        assert np.linalg.norm(M @ v - lam * v) <= 1e-8 * 120 * np.abs(M).max()

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            smallest_eigenpair(np.array([[0.0, 1.0], [0.0, 0.0]]))
