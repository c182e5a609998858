from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracfilm.grid_spectral import (
    Field,
    Grid,
    GridMismatchError,
    VectorField,
    apply_fractional_power,
    apply_inverse_power,
    dealias,
    divergence,
    fourier_inner_product,
    from_function,
    gradient,
    inner_product,
    laplacian,
    riesz_gradient,
    seminorm_squared,
)
from fracfilm.whole_space import (
    boundary_fraction,
    fractional_laplacian,
    kernel_constant,
    riesz_constant,
    riesz_potential,
    whole_space_operator,
)


def gaussian(grid: Grid, width: float = 1.0) -> Field:
    return from_function(grid, lambda *x: np.exp(-sum(c * c for c in x) / width**2))


def gaussian_hs_energy(d: int, s: float) -> float:
    """½∫|𝓛_{s/2} e^{−|x|²}|² in closed form."""
    if d == 1:
        return 0.25 * 2 ** (s + 0.5) * math.gamma(s + 0.5)
    return 0.25 * math.pi * 2**s * math.gamma(s + 1)


class TestGrid:
    def test_coordinates_centered(self):
        g = Grid(1, 16, 4.0)
        x = g.axis()
        assert x[8] == 0.0
        assert x[0] == -2.0
        assert g.spacing == 0.25

    def test_shape_and_volume_2d(self):
        g = Grid(2, 32, 8.0)
        assert g.shape == (32, 32)
        assert g.cell_volume == pytest.approx(0.0625)

    @pytest.mark.parametrize("n", [15, 8, 100])
    def test_rejects_bad_point_count(self, n):
        with pytest.raises(ValueError):
            Grid(1, n, 1.0)

    @pytest.mark.parametrize("L", [0.0, -1.0, math.inf])
    def test_rejects_bad_side(self, L):
        with pytest.raises(ValueError):
            Grid(1, 16, L)

    def test_rejects_dimension_three(self):
        with pytest.raises(ValueError):
            Grid(3, 16, 1.0)

    def test_rescaled_keeps_samples(self):
        g = Grid(1, 64, 2.0).rescaled(3.0)
        assert g.side_length == 6.0 and g.points_per_axis == 64


class TestField:
    def test_rejects_nonfinite(self):
        g = Grid(1, 16, 1.0)
        vals = np.zeros(16)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            Field(g, vals)

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            Field(Grid(1, 16, 1.0), np.zeros(17))

    def test_mismatch_raises(self):
        a = Field(Grid(1, 16, 1.0), np.zeros(16))
        b = Field(Grid(1, 16, 2.0), np.zeros(16))
        with pytest.raises(GridMismatchError):
            a + b

    def test_vector_component_count(self):
        with pytest.raises(ValueError):
            VectorField(Grid(2, 16, 1.0), (np.zeros((16, 16)),))


class TestSpectralOperators:
    def test_laplacian_of_cosine(self):
        g = Grid(1, 64, 2 * math.pi)
        f = from_function(g, lambda x: np.cos(3 * x))
        assert np.allclose(laplacian(f).values, -9 * f.values, atol=1e-12)

    def test_fractional_power_of_mode(self):
        g = Grid(2, 32, 2 * math.pi)
        f = from_function(g, lambda x, y: np.sin(2 * x) * np.cos(y))
        out = apply_fractional_power(f, 0.5)
        assert np.allclose(out.values, math.sqrt(5) * f.values, atol=1e-12)

    def test_inverse_power_drops_mean(self):
        g = Grid(1, 64, 2 * math.pi)
        f = from_function(g, lambda x: 1.0 + np.cos(x))
        assert np.allclose(apply_inverse_power(f, 0.3).values, np.cos(g.axis()), atol=1e-12)

    @pytest.mark.parametrize("sigma", [0.0, 2.5])
    def test_power_range(self, sigma):
        g = Grid(1, 16, 1.0)
        with pytest.raises(ValueError):
            apply_fractional_power(Field(g, np.zeros(16)), sigma)

    def test_divergence_of_gradient_is_laplacian(self):
        g = Grid(2, 64, 16.0)
        f = gaussian(g)
        assert np.allclose(divergence(gradient(f)).values, laplacian(f).values, atol=1e-10)

    def test_riesz_gradient_energy(self):
        g = Grid(1, 256, 16.0)
        f = gaussian(g)
        xi = riesz_gradient(f, 0.5)
        lhs = sum(inner_product(Field(g, c), Field(g, c)) for c in xi.components)
        assert lhs == pytest.approx(seminorm_squared(f, 1.5), rel=1e-10)

    def test_dealias_removes_high_modes(self):
        g = Grid(1, 64, 2 * math.pi)
        f = from_function(g, lambda x: np.cos(30 * x) + np.cos(2 * x))
        assert np.allclose(dealias(f).values, np.cos(2 * g.axis()), atol=1e-12)

    @given(st.integers(0, 2**31 - 1))
    def test_plancherel(self, seed):
        g = Grid(2, 16, 3.0)
        rng = np.random.default_rng(seed)
        a = Field(g, rng.standard_normal(g.shape))
        b = Field(g, rng.standard_normal(g.shape))
        assert fourier_inner_product(a, b) == pytest.approx(inner_product(a, b), rel=1e-9, abs=1e-12)

    @given(st.floats(0.05, 1.95), st.integers(1, 10))
    def test_seminorm_of_mode(self, sigma, m):
        g = Grid(1, 64, 2 * math.pi)
        f = from_function(g, lambda x: np.cos(m * x))
        assert seminorm_squared(f, sigma) == pytest.approx(m ** (2 * sigma) * math.pi, rel=1e-10)


class TestWholeSpace:
    def test_kernel_constants(self):
        assert kernel_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
        assert kernel_constant(2, 0.5) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
        assert riesz_constant(1, 0.25) == pytest.approx(0.3989422804014326, rel=1e-14)

    def test_riesz_requires_d_above_2s(self):
        with pytest.raises(ValueError):
            riesz_constant(1, 0.5)

    @pytest.mark.parametrize("d,s", [(1, 0.25), (1, 0.75), (2, 0.5)])
    def test_gaussian_energy(self, d, s):
        g = Grid(d, 256 if d == 1 else 64, 16.0)
        E = 0.5 * whole_space_operator(g, s).quadratic_form(gaussian(g).values)
        assert E == pytest.approx(gaussian_hs_energy(d, s), rel=1e-6)

    def test_symmetric(self):
        g = Grid(1, 128, 16.0)
        rng = np.random.default_rng(1)
        box = np.abs(g.axis()) < 4
        a = rng.standard_normal(128) * box
        b = rng.standard_normal(128) * box
        op = whole_space_operator(g, 0.4)
        assert np.vdot(a, op.fractional_laplacian(b)) == pytest.approx(np.vdot(b, op.fractional_laplacian(a)), rel=1e-10)

    def test_positive_on_box_data(self):
        g = Grid(1, 64, 8.0)
        rng = np.random.default_rng(2)
        op = whole_space_operator(g, 0.5)
        for _ in range(5):
            assert op.quadratic_form(rng.standard_normal(64)) > 0

    @pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
    def test_riesz_potential_at_origin(self, s):
        g = Grid(1, 1024, 32.0)
        p = riesz_potential(gaussian(g), s).values[512]
        exact = 2 ** (-2 * s) * math.gamma(0.5 - s) / math.sqrt(math.pi)
        assert p == pytest.approx(exact, rel=1e-6)

    def test_periodic_variant_matches_symbol(self):
        g = Grid(1, 64, 2 * math.pi)
        f = from_function(g, lambda x: np.cos(2 * x))
        assert np.allclose(fractional_laplacian(f, 0.5, whole_space=False).values, 2 * f.values, atol=1e-12)

    def test_whole_space_differs_from_periodic_on_constant_background(self):
        g = Grid(1, 64, 8.0)
        f = gaussian(g)
        per = fractional_laplacian(f, 0.5, whole_space=False).values
        ws = fractional_laplacian(f, 0.5).values
        assert np.max(np.abs(per - ws)) > 1e-3

    def test_boundary_fraction(self):
        g = Grid(1, 128, 16.0)
        assert boundary_fraction(gaussian(g)) < 1e-6
        assert boundary_fraction(Field(g, np.ones(128))) == 1.0
