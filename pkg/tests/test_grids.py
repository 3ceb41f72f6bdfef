import numpy as np
import pytest

from ttgreeks.grids import (AxisGrid, chebyshev_diff_matrix,
                            chebyshev_lobatto_axis, gauss_kronrod_axis,
                            gauss_kronrod_rule, gauss_legendre_rule)

# Published 15-point Kronrod rule (positive half, descending), the standard
# extension of 7-point Gauss used by adaptive quadrature libraries.
K15_NODES = [0.991455371120813, 0.949107912342759, 0.864864423359769,
             0.741531185599394, 0.586087235467691, 0.405845151377397,
             0.207784955007898, 0.0]
K15_WEIGHTS = [0.022935322010529, 0.063092092629979, 0.104790010322250,
               0.140653259715525, 0.169004726639267, 0.190350578064785,
               0.204432940075298, 0.209482141084728]


class TestGaussKronrod:
    def test_matches_published_k15(self):
        x, w = gauss_kronrod_rule(7)
        np.testing.assert_allclose(x[7:][::-1], K15_NODES, atol=1e-12)
        np.testing.assert_allclose(w[7:][::-1], K15_WEIGHTS, atol=1e-12)

    def test_k5_rational_weights(self):
        # the 5-point extension of 2-point Gauss has rational weights
        x, w = gauss_kronrod_rule(2)
        np.testing.assert_allclose(sorted(np.abs(x)), [0.0, 1 / np.sqrt(3),
                                                       1 / np.sqrt(3),
                                                       0.925820099772551,
                                                       0.925820099772551],
                                   atol=1e-12)
        np.testing.assert_allclose(sorted(w), sorted([98 / 495, 27 / 55, 28 / 45,
                                                      27 / 55, 98 / 495]),
                                   atol=1e-13)

    def test_weights_integrate_constant(self):
        ax = gauss_kronrod_axis(15, (-1.0, 1.0))
        assert abs(ax.weights.sum() - 2.0) <= 1e-13

    @pytest.mark.parametrize("n", [1, 2, 7, 15, 31, 63])
    def test_monomial_exactness_to_degree_3n_plus_1(self, n):
        x, w = gauss_kronrod_rule(n)
        for deg in range(3 * n + 2):
            exact = 2.0 / (deg + 1) if deg % 2 == 0 else 0.0
            assert abs(np.dot(w, x**deg) - exact) <= 1e-12, f"degree {deg}"

    @pytest.mark.parametrize("n", [7, 15, 63])
    def test_gauss_nodes_embedded_and_interleaved(self, n):
        xk, _ = gauss_kronrod_rule(n)
        xg, _ = gauss_legendre_rule(n)
        # every Gauss node appears among the Kronrod nodes
        for g in xg:
            assert np.min(np.abs(xk - g)) <= 1e-12
        # the added nodes strictly interleave the Gauss nodes
        added = sorted(set(range(2 * n + 1))
                       - {int(np.argmin(np.abs(xk - g))) for g in xg})
        assert added == list(range(0, 2 * n + 1, 2))

    def test_table_scale_axis_bounds(self):
        ax = gauss_kronrod_axis(63, (-25.0, 25.0))
        assert ax.size == 127
        assert ax.bounds == (-25.0, 25.0)
        assert ax.nodes.min() > -25.0 and ax.nodes.max() < 25.0
        assert np.all(ax.weights > 0)
        assert abs(ax.weights.sum() - 50.0) <= 1e-11

    def test_scaled_quadrature_value(self):
        ax = gauss_kronrod_axis(10, (0.0, 2.0))
        # oracle: int_0^2 exp(x) dx = e^2 - 1
        val = np.dot(ax.weights, np.exp(ax.nodes))
        assert abs(val - (np.e**2 - 1)) <= 1e-12


class TestChebyshevLobatto:
    def test_two_nodes_are_endpoints(self):
        ax = chebyshev_lobatto_axis(2, (-3.0, 7.0))
        np.testing.assert_allclose(ax.nodes, [7.0, -3.0])

    def test_three_nodes_unit_interval(self):
        ax = chebyshev_lobatto_axis(3, (-1.0, 1.0))
        np.testing.assert_allclose(ax.nodes, [1.0, 0.0, -1.0], atol=1e-15)

    def test_spot_axis_production_size(self):
        ax = chebyshev_lobatto_axis(100, (90.0, 120.0), kind="spot")
        assert ax.size == 100
        assert ax.nodes[0] == 120.0 and ax.nodes[-1] == 90.0
        assert np.all(np.diff(ax.nodes) < 0)  # paper's cosine (descending) order


class TestDiffMatrix:
    def test_corner_entry_formula(self):
        for n in (5, 10, 100):
            dm = chebyshev_diff_matrix(n, (-1.0, 1.0))
            corner = (2.0 * (n - 1) ** 2 + 1.0) / 6.0
            assert dm.entries[0, 0] == pytest.approx(corner, rel=1e-15)
            assert dm.entries[-1, -1] == pytest.approx(-corner, rel=1e-15)

    def test_kills_constants(self):
        for n in (8, 16):
            dm = chebyshev_diff_matrix(n, (90.0, 120.0))
            out = dm.entries @ np.ones(n)
            assert np.abs(out).max() <= 1e-12

    def test_cubic_derivative_on_spot_interval(self):
        n = 20
        dm = chebyshev_diff_matrix(n, (90.0, 120.0))
        ax = chebyshev_lobatto_axis(n, (90.0, 120.0))
        out = dm.entries @ ax.nodes**3
        np.testing.assert_allclose(out, 3 * ax.nodes**2, rtol=1e-8)

    @pytest.mark.parametrize("n", [6, 12, 24])
    def test_exact_on_polynomials_below_node_count(self, n, rng):
        dm = chebyshev_diff_matrix(n, (0.5, 2.5))
        ax = chebyshev_lobatto_axis(n, (0.5, 2.5))
        coeffs = rng.normal(size=n)  # degree n-1
        vals = np.polyval(coeffs, ax.nodes)
        deriv = np.polyval(np.polyder(coeffs), ax.nodes)
        out = dm.entries @ vals
        scale = np.abs(deriv).max()
        assert np.abs(out - deriv).max() <= 1e-9 * scale

    def test_squared_matrix_gives_second_derivative(self, rng):
        n = 14
        dm = chebyshev_diff_matrix(n, (90.0, 120.0))
        ax = chebyshev_lobatto_axis(n, (90.0, 120.0))
        coeffs = rng.normal(size=n - 1)  # degree n-2
        vals = np.polyval(coeffs, ax.nodes)
        second = np.polyval(np.polyder(coeffs, 2), ax.nodes)
        out = dm.entries @ (dm.entries @ vals)
        scale = max(np.abs(second).max(), 1.0)
        assert np.abs(out - second).max() <= 1e-8 * scale


class TestAxisGridValidation:
    def test_rejects_unordered_nodes(self):
        with pytest.raises(ValueError, match="monotone"):
            AxisGrid(kind="spot", nodes=np.array([1.0, 3.0, 2.0]),
                     bounds=(0.0, 4.0))

    def test_rejects_nodes_outside_bounds(self):
        with pytest.raises(ValueError, match="bounds"):
            AxisGrid(kind="spot", nodes=np.array([0.0, 5.0]), bounds=(0.0, 4.0))

    def test_fourier_axis_requires_weights(self):
        with pytest.raises(ValueError, match="weights"):
            AxisGrid(kind="fourier-z", nodes=np.array([-1.0, 1.0]),
                     bounds=(-1.0, 1.0))

    def test_kronrod_failure_names_n(self):
        with pytest.raises(ValueError, match="n_gauss"):
            gauss_kronrod_rule(0)

    def test_round_trip_dict(self):
        ax = gauss_kronrod_axis(5, (-2.0, 2.0))
        back = AxisGrid.from_dict(ax.to_dict())
        np.testing.assert_array_equal(back.nodes, ax.nodes)
        np.testing.assert_array_equal(back.weights, ax.weights)
        assert back.kind == ax.kind and back.bounds == ax.bounds
