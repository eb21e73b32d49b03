import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrb.errors import ConfigError
from nlrb.grid import (
    CHEBYSHEV,
    UNIFORM,
    build_grid,
    diff_operator,
    fornberg_weights,
    grid_points,
    interp_matrix,
    quadrature_weights,
)


class TestPoints:
    def test_uniform_three_point_concept(self):
        assert np.allclose(grid_points(3, UNIFORM), [-1.0, 0.0, 1.0])

    def test_chebyshev_five_points_closed_form(self):
        s = np.sqrt(2.0) / 2.0
        assert np.allclose(grid_points(5, CHEBYSHEV), [-1.0, -s, 0.0, s, 1.0], atol=1e-15)

    def test_uniform_seven_point_spacing(self):
        pts = grid_points(7, UNIFORM)
        assert np.allclose(np.diff(pts), 1.0 / 3.0)

    @pytest.mark.parametrize("kind", [UNIFORM, CHEBYSHEV])
    @pytest.mark.parametrize("n", [8, 33, 257])
    def test_grid_invariants(self, n, kind):
        g = build_grid(n, kind)
        assert g.points[0] == -1.0 and g.points[-1] == 1.0
        assert np.all(np.diff(g.points) > 0)
        assert g.n == n == len(g.points)

    def test_too_small_grid_rejected(self):
        with pytest.raises(ConfigError):
            build_grid(5, UNIFORM)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            build_grid(16, "legendre")


class TestDiffOperator:
    @pytest.mark.parametrize("kind", [UNIFORM, CHEBYSHEV])
    @pytest.mark.parametrize("order", [1, 2])
    def test_annihilates_constants(self, kind, order):
        g = build_grid(257, kind)
        d = diff_operator(g, order)
        out = d.apply(np.full(g.n, 3.7))
        assert np.max(np.abs(out)) < 1e-12

    @pytest.mark.parametrize("kind", [UNIFORM, CHEBYSHEV])
    def test_exact_on_linear(self, kind):
        g = build_grid(257, kind)
        d = diff_operator(g, 1)
        assert np.max(np.abs(d.apply(g.points) - 1.0)) < 1e-10

    def test_chebyshev_sin_derivative(self):
        g = build_grid(256, CHEBYSHEV)
        d = diff_operator(g, 1)
        err = d.apply(np.sin(3.0 * g.points)) - 3.0 * np.cos(3.0 * g.points)
        assert np.max(np.abs(err)) < 1e-8

    def test_chebyshev_second_derivative(self):
        g = build_grid(256, CHEBYSHEV)
        d2 = diff_operator(g, 2)
        err = d2.apply(np.sin(3.0 * g.points)) + 9.0 * np.sin(3.0 * g.points)
        assert np.max(np.abs(err)) < 1e-6

    @pytest.mark.parametrize("order", [1, 2])
    def test_uniform_design_order_polynomial_exactness(self, order):
        # 6-point closures and 5-point interior stencils are exact to degree 4
        g = build_grid(64, UNIFORM)
        x = g.points
        d = diff_operator(g, order)
        for k in range(5):
            vals = x**k
            if order == 1:
                ref = k * x ** (k - 1) if k >= 1 else np.zeros_like(x)
            else:
                ref = k * (k - 1) * x ** (k - 2) if k >= 2 else np.zeros_like(x)
            assert np.max(np.abs(d.apply(vals) - ref)) < 1e-9, f"degree {k}"

    def test_unsupported_order(self):
        g = build_grid(16, CHEBYSHEV)
        with pytest.raises(ConfigError):
            diff_operator(g, 3)

    @pytest.mark.parametrize("kind", [UNIFORM, CHEBYSHEV])
    def test_deterministic_construction(self, kind):
        a = diff_operator(build_grid(65, kind), 1).matrix
        b = diff_operator(build_grid(65, kind), 1).matrix
        assert np.array_equal(a, b)

    def test_matrix_columns_apply(self):
        g = build_grid(33, CHEBYSHEV)
        d = diff_operator(g, 1)
        cols = np.stack([g.points, g.points**2], axis=1)
        out = d.apply(cols)
        assert out.shape == (33, 2)
        assert np.max(np.abs(out[:, 1] - 2 * g.points)) < 1e-10


class TestQuadrature:
    def test_uniform_three_point_trapezoid(self):
        w = quadrature_weights(build_grid(8, UNIFORM)).weights
        h = 2.0 / 7.0
        assert np.allclose(w, [h / 2] + [h] * 6 + [h / 2])

    @pytest.mark.parametrize("kind", [UNIFORM, CHEBYSHEV])
    @pytest.mark.parametrize("n", [8, 65, 128, 257])
    def test_weights_sum_to_interval_length(self, n, kind):
        q = quadrature_weights(build_grid(n, kind))
        assert abs(q.weights.sum() - 2.0) < 1e-12
        assert np.all(q.weights >= 0.0)

    def test_chebyshev_integrates_square(self):
        g = build_grid(128, CHEBYSHEV)
        q = quadrature_weights(g)
        assert abs(q.integrate(g.points**2) - 2.0 / 3.0) < 1e-10

    @settings(max_examples=25, deadline=None)
    @given(
        coeffs=st.lists(st.floats(-3, 3), min_size=1, max_size=12),
        n=st.sampled_from([16, 33, 64]),
    )
    def test_chebyshev_exact_on_design_degree_polynomials(self, coeffs, n):
        g = build_grid(n, CHEBYSHEV)
        q = quadrature_weights(g)
        coeffs = coeffs[: q.design_degree + 1]
        vals = np.polynomial.polynomial.polyval(g.points, coeffs)
        exact = sum(c * (1.0 + (-1.0) ** k) / (k + 1.0) for k, c in enumerate(coeffs))
        assert abs(q.integrate(vals) - exact) <= 1e-12 * max(1.0, abs(exact))


class TestInterp:
    def test_chebyshev_reproduces_polynomial(self):
        g = build_grid(17, CHEBYSHEV)
        xq = np.array([-0.77, -0.2, 0.11, 0.63, 0.999])
        p = interp_matrix(g, xq)
        f = g.points**5 - 2.0 * g.points**2 + 0.5
        ref = xq**5 - 2.0 * xq**2 + 0.5
        assert np.max(np.abs(p @ f - ref)) < 1e-12

    def test_exact_node_hit(self):
        g = build_grid(16, CHEBYSHEV)
        p = interp_matrix(g, g.points[[0, 7, 15]])
        f = np.sin(g.points)
        assert np.allclose(p @ f, f[[0, 7, 15]], atol=1e-14)

    def test_uniform_cubic_accuracy(self):
        g = build_grid(257, UNIFORM)
        xq = np.linspace(-0.99, 0.99, 41)
        p = interp_matrix(g, xq)
        err = p @ np.sin(3 * g.points) - np.sin(3 * xq)
        assert np.max(np.abs(err)) < 1e-6

    def test_out_of_range_rejected(self):
        g = build_grid(16, CHEBYSHEV)
        with pytest.raises(ConfigError):
            interp_matrix(g, np.array([1.2]))


def test_fornberg_matches_classic_centered_stencil():
    x = np.arange(-2.0, 3.0)
    w1 = fornberg_weights(0.0, x, 1)
    assert np.allclose(w1, np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)
    w2 = fornberg_weights(0.0, x, 2)
    assert np.allclose(w2, np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0)
