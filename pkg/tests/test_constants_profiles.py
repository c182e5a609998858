from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracfilm.constants_profiles import (
    Family,
    barenblatt_coefficients,
    constant_for_mass,
    dyda_mass_quadrature,
    higher_order_laplacian_split,
    kappa,
    model_constants,
    profile_dyda,
    profile_for_constant,
    profile_getoor,
    profile_higher_order,
    rescaled_radial,
    selfsimilar_field,
    selfsimilar_value,
)
from fracfilm.diagnostics import mass
from fracfilm.grid_spectral import Grid, laplacian


FROZEN = {
    # (d, s): (beta, kappa, C2, M1, R_D)
    (1, 0.25): (0.2857142857142857, 1.1077836568159478, 0.1404379876507742, 6.57445786121237, 3.24037034920393),
    (1, 0.5): (0.25, 1.5000000000000004, 0.12018746419228403, 12.56637061435917, 4.0),
    (1, 0.75): (0.2222222222222222, 2.326345679313491, 0.10418282593840016, 23.5558254919851, 4.743416490252569),
    (2, 0.25): (0.2222222222222222, 1.4523362529378026, 0.10700996929053555, 19.808009214552342, 3.354101966249685),
    (2, 0.5): (0.2, 2.3561944901923453, 0.09285352665081466, 30.98386676965935, 3.8729833462074175),
    (2, 0.75): (0.18181818181818182, 4.180932537433194, 0.08147537094414606, 48.33901573246896, 4.387482193696061),
}


class TestConstants:
    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen(self, key):
        c = model_constants(*key)
        got = (c.beta, c.kappa, c.C2, c.mass_M1, c.radius_RD)
        assert got == pytest.approx(FROZEN[key], rel=1e-13)

    def test_endpoint_values(self):
        assert model_constants(1, 0.0).C2 == pytest.approx(1 / 6, rel=1e-12)
        assert model_constants(1, 1.0).C2 ** 2 == pytest.approx(1 / 120, rel=1e-12)
        assert model_constants(1, 0.0, Family.FOURTH).a ** 2 == pytest.approx(1 / 120, rel=1e-12)

    def test_fourth_family_frozen(self):
        c = model_constants(1, 0.5, "fourth")
        assert (c.beta, c.a, c.c_sd, c.mu) == pytest.approx(
            (0.16666666666666666, 0.07195599806277589, 0.28952879390482367, 8.0), rel=1e-13
        )

    @given(st.sampled_from([1, 2]), st.floats(0.0, 1.0), st.sampled_from(list(Family)))
    def test_exponent_relations(self, d, s, fam):
        c = model_constants(d, s, fam)
        order = 1 + s if fam is Family.SECOND else 2 + s
        assert c.alpha == pytest.approx(d * c.beta)
        assert c.alpha + 2 * c.beta * order == pytest.approx(1.0)
        assert c.lam**2 == pytest.approx(c.beta / (2 * c.gamma))

    def test_kappa_half_1d(self):
        assert kappa(1, 0.5) == pytest.approx(1.5, rel=1e-14)

    @pytest.mark.parametrize("d,s", [(3, 0.5), (1, -0.1), (1, 1.1)])
    def test_rejects_bad_input(self, d, s):
        with pytest.raises(ValueError):
            model_constants(d, s)

    def test_to_dict_family_is_string(self):
        assert model_constants(1, 0.5).to_dict()["family"] == "second"


class TestProfiles:
    def test_dyda_peak_and_support(self):
        c = model_constants(1, 0.5)
        v = profile_dyda(Grid(1, 1024, 16.0), c)
        assert v.values.max() == pytest.approx(1 / (c.lam * c.kappa), rel=1e-12)
        r = Grid(1, 1024, 16.0).radius()
        assert np.all(v.values[r >= c.radius_RD] == 0.0)

    def test_profile_must_fit(self):
        with pytest.raises(ValueError):
            profile_dyda(Grid(1, 64, 6.0), model_constants(1, 0.5))

    def test_getoor_normalised(self):
        f, scale = profile_getoor(Grid(1, 256, 4.0), 1, 0.5, radius=1.0)
        assert scale == 1.0
        assert f.values.max() == pytest.approx(1 / model_constants(1, 0.5).kappa_getoor, rel=1e-12)

    @pytest.mark.parametrize("d,s", [(1, 0.25), (1, 0.5), (2, 0.75)])
    def test_mass_matches_M1(self, d, s):
        c = model_constants(d, s)
        assert dyda_mass_quadrature(d, s) == pytest.approx(c.mass_M1, rel=2e-4)

    @given(st.floats(0.2, 3.0))
    def test_mass_scaling(self, C):
        c = model_constants(1, 0.5)
        M = c.mass_M1 * C ** (1 + c.s + c.d / 2)
        assert constant_for_mass(c, M) == pytest.approx(C, rel=1e-12)

    def test_barenblatt_form(self):
        c = model_constants(1, 0.5)
        C1, C2 = barenblatt_coefficients(c, 2.0)
        r = np.linspace(0, 5, 11)
        expected = np.maximum(C1 - C2 * r * r, 0.0) ** 1.5
        assert np.allclose(rescaled_radial(c, 2.0)(r), expected, rtol=1e-12, atol=1e-14)

    def test_profile_for_constant_mass(self):
        c = model_constants(1, 0.5)
        g = Grid(1, 4096, 32.0)
        C = constant_for_mass(c, 3.0)
        assert mass(profile_for_constant(g, c, C)) == pytest.approx(3.0, rel=2e-4)

    def test_selfsimilar_conserves_mass(self):
        c = model_constants(1, 0.5)
        g = Grid(1, 4096, 32.0)
        m0 = mass(selfsimilar_field(g, 0.0, 1.0, c))
        m1 = mass(selfsimilar_field(g, 3.0, 1.0, c))
        assert m1 == pytest.approx(m0, rel=2e-4)

    def test_selfsimilar_value_matches_field(self):
        c = model_constants(2, 0.5)
        g = Grid(2, 64, 16.0)
        f = selfsimilar_field(g, 0.5, 1.0, c)
        pts = np.stack([x.ravel() for x in g.coordinates()], axis=-1)
        assert np.allclose(selfsimilar_value(pts, 0.5, 1.0, c), f.values.ravel())

    def test_selfsimilar_rejects_time(self):
        with pytest.raises(ValueError):
            selfsimilar_field(Grid(1, 64, 16.0), -1.0, 1.0, model_constants(1, 0.5))

    def test_higher_order_support_and_constant(self):
        c = model_constants(1, 0.5, Family.FOURTH)
        K = (4 * c.lam) ** 2
        prof = profile_higher_order(Grid(1, 1024, 16.0), c, K)
        assert prof.support_radius == pytest.approx(4.0, rel=1e-12)
        assert prof.C == pytest.approx(c.c_sd * prof.A, rel=1e-12)

    def test_higher_order_needs_fourth(self):
        with pytest.raises(ValueError):
            profile_higher_order(Grid(1, 64, 16.0), model_constants(1, 0.5), 1.0)

    def test_laplacian_split(self):
        c = model_constants(1, 0.5, Family.FOURTH)
        g = Grid(1, 4096, 16.0)
        prof = profile_higher_order(g, c, (4 * c.lam) ** 2)
        F1, F2 = higher_order_laplacian_split(g, c, prof.A)
        lap = -laplacian(prof.field).values
        inside = g.radius() < 3.5
        assert np.max(np.abs((F1 + F2 - lap)[inside])) < 1e-3 * np.max(np.abs(lap))
