import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import comb, expit

from dive.bernstein import (
    DegenerateCDFError,
    LinkFunction,
    MonotoneCoefficients,
    ParametricCDF,
    QuantileRangeError,
    ResponseScaler,
    UnconstrainedParams,
    bernstein_basis,
    bernstein_basis_derivative,
    cdf_eval,
    constrain,
    constrain_array,
    pdf_eval,
    quantile,
    unconstrain,
)
from tests.conftest import linear_index_cdf


def binomial_basis(u, order):
    # direct evaluation from the binomial formula, the oracle for small orders
    j = np.arange(order + 1)
    return comb(order, j) * u**j * (1.0 - u) ** (order - j)


class TestBasis:
    def test_left_endpoint(self):
        np.testing.assert_array_equal(bernstein_basis(0.0, 2), [1.0, 0.0, 0.0])

    def test_right_endpoint(self):
        np.testing.assert_array_equal(bernstein_basis(1.0, 2), [0.0, 0.0, 1.0])

    def test_midpoint_order_two(self):
        np.testing.assert_allclose(bernstein_basis(0.5, 2), [0.25, 0.5, 0.25], rtol=1e-15)

    @given(st.floats(0.0, 1.0), st.integers(1, 12))
    def test_matches_binomial_formula(self, u, order):
        np.testing.assert_allclose(
            bernstein_basis(u, order), binomial_basis(u, order), atol=1e-12
        )

    @given(st.floats(0.0, 1.0), st.integers(1, 60))
    @settings(max_examples=250)
    def test_partition_of_unity(self, u, order):
        values = bernstein_basis(u, order)
        assert np.all(values >= 0.0)
        assert abs(values.sum() - 1.0) <= 1e-12

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bernstein_basis(-0.1, 3)
        with pytest.raises(ValueError):
            bernstein_basis(1.1, 3)
        with pytest.raises(ValueError):
            bernstein_basis(0.5, 0)

    def test_vectorized_shape(self):
        out = bernstein_basis(np.linspace(0, 1, 7), 5)
        assert out.shape == (7, 6)


class TestBasisDerivative:
    def test_endpoints_order_two(self):
        np.testing.assert_allclose(bernstein_basis_derivative(0.0, 2), [-2.0, 2.0, 0.0])
        np.testing.assert_allclose(bernstein_basis_derivative(1.0, 2), [0.0, -2.0, 2.0])

    @given(st.floats(0.0, 1.0), st.integers(1, 30))
    def test_entries_sum_to_zero(self, u, order):
        assert abs(bernstein_basis_derivative(u, order).sum()) <= 1e-10

    @given(st.floats(0.01, 0.99), st.integers(1, 30))
    @settings(max_examples=150)
    def test_matches_central_differences(self, u, order):
        h = 1e-6
        fd = (bernstein_basis(u + h, order) - bernstein_basis(u - h, order)) / (2 * h)
        np.testing.assert_allclose(
            bernstein_basis_derivative(u, order), fd, atol=1e-6
        )


class TestScalerAndLinks:
    def test_scaler_maps_onto_unit_interval(self):
        scaler = ResponseScaler(-3.0, 5.0)
        assert scaler.scale(-3.0) == 0.0
        assert scaler.scale(5.0) == 1.0
        assert scaler.scale(1.0) == 0.5
        assert scaler.scale(100.0) == 1.0  # clamped

    def test_scaler_requires_ordered_bounds(self):
        with pytest.raises(ValueError):
            ResponseScaler(2.0, 2.0)

    def test_scaler_from_data_pads_by_a_tenth_of_the_range(self):
        scaler = ResponseScaler.from_data([0.0, 10.0])
        assert scaler.lower == -1.0
        assert scaler.upper == 11.0

    @pytest.mark.parametrize("kind", [
        "standard-normal", "standard-logistic", "min-extreme-value", "max-extreme-value",
    ])
    def test_links_are_increasing_cdfs_with_positive_density(self, kind):
        link = LinkFunction(kind)
        x = np.linspace(-3, 3, 101)
        values = link.cdf(x)
        assert np.all(np.diff(values) > 0)
        assert np.all((values > 0) & (values < 1))
        assert np.all(link.pdf(x) > 0)
        np.testing.assert_allclose(link.quantile(values), x, atol=1e-8)
        fd = (link.cdf(x + 1e-6) - link.cdf(x - 1e-6)) / 2e-6
        np.testing.assert_allclose(link.pdf(x), fd, atol=1e-6)
        fd_log = (np.log(link.pdf(x + 1e-6)) - np.log(link.pdf(x - 1e-6))) / 2e-6
        np.testing.assert_allclose(link.dlogpdf(x), fd_log, atol=1e-5)

    def test_unknown_link_rejected(self):
        with pytest.raises(ValueError):
            LinkFunction("cauchy")


class TestConstrain:
    def test_softplus_increments_keep_order(self):
        coeffs = constrain(UnconstrainedParams((0.0, -40.0, -40.0)))
        theta = coeffs.as_array()
        assert theta[0] == 0.0
        assert np.all(np.diff(theta) > 0)

    def test_unit_increment(self):
        coeffs = constrain(UnconstrainedParams((0.0, np.log(np.e - 1.0))))
        np.testing.assert_allclose(coeffs.as_array(), [0.0, 1.0], atol=1e-12)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=20))
    def test_roundtrip_identity(self, gamma):
        g = UnconstrainedParams(tuple(gamma))
        back = unconstrain(constrain(g, bound=1e6))
        np.testing.assert_allclose(back.as_array(), g.as_array(), atol=1e-10)

    def test_clipping_warns_and_flags(self):
        with pytest.warns(RuntimeWarning, match="clipped"):
            coeffs = constrain(UnconstrainedParams((0.0, 30.0)), bound=15.0)
        assert coeffs.as_array()[1] < 15.0
        _, clipped = constrain_array(np.array([0.0, 30.0]), bound=15.0)
        assert clipped.tolist() == [False, True]

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            constrain_array(np.array([0.0, np.nan]))

    def test_monotone_coefficients_validation(self):
        with pytest.raises(ValueError):
            MonotoneCoefficients(theta=(1.0, 0.0))
        with pytest.raises(ValueError):
            MonotoneCoefficients(theta=(0.0, 20.0), bound=15.0)


@pytest.fixture
def gentle_cdf():
    return linear_index_cdf(slope=0.6, intercept=0.2, lower=-4.0, upper=4.0, order=6)


class TestParametricCDF:
    def test_flat_coefficients_give_half_under_normal_link(self):
        cdf = ParametricCDF(
            scaler=ResponseScaler(0.0, 1.0),
            link=LinkFunction(),
            coeffs=MonotoneCoefficients(theta=(0.0, 0.0, 0.0)),
        )
        for y in (-1.0, 0.3, 2.0):
            assert cdf_eval(cdf, y) == 0.5

    @pytest.mark.parametrize("c", [-1.5, 0.4])
    def test_constant_coefficients_collapse_to_link(self, c):
        cdf = ParametricCDF(
            scaler=ResponseScaler(0.0, 1.0),
            link=LinkFunction("standard-logistic"),
            coeffs=MonotoneCoefficients(theta=(c, c, c)),
        )
        np.testing.assert_allclose(cdf_eval(cdf, 0.7), expit(c), rtol=1e-14)

    @given(st.floats(-6, 6), st.floats(-6, 6))
    @settings(max_examples=200)
    def test_monotone_in_y(self, a, b, gentle_cdf=None):
        cdf = linear_index_cdf(0.4, -0.1, -4.0, 4.0, order=9)
        y1, y2 = min(a, b), max(a, b)
        assert cdf_eval(cdf, y1) <= cdf_eval(cdf, y2)

    def test_values_inside_unit_interval(self, gentle_cdf):
        grid = np.linspace(-4, 4, 301)
        values = cdf_eval(gentle_cdf, grid)
        assert np.all((values > 0) & (values < 1))

    def test_json_roundtrip(self, gentle_cdf):
        payload = json.loads(gentle_cdf.to_json())
        assert set(payload) == {"link", "L", "U", "theta"}
        again = ParametricCDF.from_json(gentle_cdf.to_json())
        grid = np.linspace(-4, 4, 50)
        np.testing.assert_array_equal(cdf_eval(again, grid), cdf_eval(gentle_cdf, grid))


class TestPdf:
    def test_flat_coefficients_have_zero_density(self):
        cdf = ParametricCDF(
            scaler=ResponseScaler(0.0, 1.0),
            link=LinkFunction(),
            coeffs=MonotoneCoefficients(theta=(0.5, 0.5, 0.5)),
        )
        assert pdf_eval(cdf, 0.5) == 0.0

    def test_strictly_increasing_coefficients_give_positive_density(self, gentle_cdf):
        grid = np.linspace(-3.999, 3.999, 101)
        assert np.all(pdf_eval(gentle_cdf, grid) > 0)

    def test_quadrature_recovers_cdf_mass(self, gentle_cdf):
        grid = np.linspace(-4.0, 4.0, 2048)
        mass = np.trapz(pdf_eval(gentle_cdf, grid), grid)
        expected = cdf_eval(gentle_cdf, 4.0) - cdf_eval(gentle_cdf, -4.0)
        assert abs(mass - expected) <= 1e-6

    def test_domain_error_outside_bounds(self, gentle_cdf):
        with pytest.raises(ValueError):
            pdf_eval(gentle_cdf, 4.5)


class TestQuantile:
    def test_roundtrip_interior_points(self, gentle_cdf):
        for y0 in (-2.0, 0.0, 1.5):
            tau = float(cdf_eval(gentle_cdf, y0))
            assert abs(quantile(gentle_cdf, tau) - y0) <= 1e-6

    def test_cdf_of_quantile_hits_level(self, gentle_cdf):
        for tau in np.arange(0.01, 0.995, 0.01):
            y = quantile(gentle_cdf, tau)
            assert abs(cdf_eval(gentle_cdf, y) - tau) <= 1e-8

    def test_flat_cdf_raises(self):
        cdf = ParametricCDF(
            scaler=ResponseScaler(0.0, 1.0),
            link=LinkFunction(),
            coeffs=MonotoneCoefficients(theta=(0.1, 0.1, 0.1)),
        )
        with pytest.raises(DegenerateCDFError):
            quantile(cdf, 0.5)

    def test_level_below_attained_range_raises(self, gentle_cdf):
        low = float(cdf_eval(gentle_cdf, -4.0))
        with pytest.raises(QuantileRangeError):
            quantile(gentle_cdf, low / 2.0)
