import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chifourier import fields
from chifourier.fields import Annulus, ConfigurationError, GridSpec, ScalarField, Spectrum


def gaussian(spec, w, center=None):
    c = spec.box_length / 2 if center is None else center
    x = np.arange(spec.n) * spec.h - c
    X, Y = np.meshgrid(x, x, indexing="xy")
    return ScalarField(spec, np.exp(-(X * X + Y * Y) / (2 * w * w)))


class TestGridSpec:
    def test_derived_quantities(self):
        g = GridSpec(2, 64, 2.0)
        assert g.h == pytest.approx(1 / 32)
        assert g.shape == (64, 64)
        assert g.cell_measure == pytest.approx(1 / 32 ** 2)
        assert g.frequency_cell_measure == pytest.approx(0.25)
        assert g.nyquist == 16 and g.half_nyquist == 8
        assert g.refined().n == 128

    @pytest.mark.parametrize("kw", [dict(n=48), dict(n=8), dict(dim=4), dict(box_length=0.0),
                                    dict(box_length=math.inf)])
    def test_rejects_bad_grids(self, kw):
        with pytest.raises(ConfigurationError):
            GridSpec(**{"dim": 2, "n": 64, "box_length": 1.0, **kw})

    def test_field_shape_checked(self):
        with pytest.raises(ValueError):
            ScalarField(GridSpec(2, 16), np.zeros((16, 8)))
        with pytest.raises(ValueError):
            ScalarField(GridSpec(2, 16), np.full((16, 16), np.nan))


class TestTransforms:
    def test_gaussian_transform_matches_closed_form(self):
        # FT of exp(-|x|^2 / 2w^2) is 2 pi w^2 exp(-2 pi^2 w^2 |xi|^2)
        spec = GridSpec(2, 256, 1.0)
        w = 0.05
        S = fields.forward_transform(gaussian(spec, w, center=0.0 + 0.5))
        xi = fields.frequency_radius(spec)
        mag = np.abs(S.values)
        exact = 2 * np.pi * w * w * np.exp(-2 * np.pi ** 2 * w * w * xi ** 2)
        assert np.max(np.abs(mag - exact)) < 1e-12

    def test_zero_frequency_is_integral(self):
        spec = GridSpec(2, 64, 3.0)
        f = gaussian(spec, 0.3)
        S = fields.forward_transform(f)
        assert S.at((0, 0)).real == pytest.approx(f.integral(), rel=1e-14)

    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, (16, 16), elements=st.floats(-10, 10)),
           st.sampled_from([0.5, 1.0, 7.0]))
    def test_round_trip_and_plancherel(self, v, L):
        spec = GridSpec(2, 16, L)
        f = ScalarField(spec, v)
        S = fields.forward_transform(f)
        back = fields.inverse_transform(S)
        assert np.allclose(back.values, v, atol=1e-9)
        assert fields.lp_norm(S, 2) == pytest.approx(fields.lp_norm(f, 2), rel=1e-10, abs=1e-12)

    def test_frequency_axis_centered(self):
        spec = GridSpec(1, 16, 2.0)
        ax = fields.frequency_axis(spec)
        assert ax[8] == 0 and ax[0] == -4.0

    def test_position_radius_is_periodic_distance(self):
        spec = GridSpec(2, 16, 1.0)
        r = fields.position_radius(spec)
        assert r[0, 0] == 0
        assert r[0, 15] == pytest.approx(spec.h)


class TestNorms:
    def test_lp_norm_of_indicator(self):
        spec = GridSpec(2, 64, 1.0)
        v = np.zeros(spec.shape)
        v[:16, :16] = 1.0
        f = ScalarField(spec, v)
        for p in (1, 1.5, 2, 3):
            assert fields.lp_norm(f, p) == pytest.approx((1 / 16) ** (1 / p))
        assert fields.lp_norm(f, math.inf) == 1.0

    def test_lp_norm_rejects_small_p(self):
        with pytest.raises(ValueError):
            fields.lp_norm(ScalarField(GridSpec(2, 16), np.ones((16, 16))), 0.5)

    def test_annulus_restriction(self):
        spec = GridSpec(2, 64, 1.0)
        S = Spectrum(spec, np.ones(spec.shape, dtype=complex))
        r = fields.frequency_radius(spec)
        count = np.count_nonzero((r >= 2) & (r < 4))
        assert fields.lp_norm(S, 1, Annulus(2, 4)) == pytest.approx(count)

    def test_distribution_function(self):
        spec = GridSpec(1, 16, 1.0)
        f = ScalarField(spec, np.arange(16.0))
        d = fields.distribution(f)
        assert d(-1) == pytest.approx(1.0)
        assert d(7.5) == pytest.approx(8 / 16)
        assert d(15) == 0.0
        assert d.total_measure == pytest.approx(1.0)

    def test_weak_norm_of_power_law(self):
        # x^(-1/2) sampled at right cell ends: the i-th largest value ((i+1) h)^(-1/2)
        # sits on measure (i+1) h, so every product lambda d(lambda)^(1/2) equals 1
        spec = GridSpec(1, 4096, 1.0)
        x = (np.arange(spec.n) + 1.0) * spec.h
        f = ScalarField(spec, x ** -0.5)
        assert fields.lorentz_quasinorm(f, 2.0, math.inf) == pytest.approx(1.0, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, 32, elements=st.floats(0, 100)), st.floats(1.0, 4.0))
    def test_lorentz_diagonal_is_lebesgue(self, v, q):
        spec = GridSpec(1, 32, 1.0)
        f = ScalarField(spec, v)
        assert fields.lorentz_quasinorm(f, q, q) == pytest.approx(fields.lp_norm(f, q), rel=1e-9, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, 32, elements=st.floats(0, 100)), st.floats(1.1, 4.0))
    def test_lorentz_nested(self, v, q):
        # L^{q,r} quasinorms decrease in r (with this normalisation, up to constants 1 at r=inf)
        spec = GridSpec(1, 32, 1.0)
        f = ScalarField(spec, v)
        weak = fields.lorentz_quasinorm(f, q, math.inf)
        strong = fields.lorentz_quasinorm(f, q, q)
        assert weak <= strong * (1 + 1e-12) + 1e-300

    def test_lorentz_rejects_bad_exponents(self):
        with pytest.raises(ValueError):
            fields.lorentz_from_magnitudes(np.ones(4), 1.0, 0.0)
        with pytest.raises(ValueError):
            fields.lorentz_from_magnitudes(np.ones(4), 1.0, 2.0, 0.5)


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        spec = GridSpec(2, 16, 2.5)
        f = gaussian(spec, 0.3)
        fields.save_field(f, tmp_path / "f.cfl")
        g = fields.load_field(tmp_path / "f.cfl")
        assert isinstance(g, ScalarField) and g.spec == spec
        assert np.array_equal(g.values, f.values)
        S = fields.forward_transform(f)
        fields.save_field(S, tmp_path / "s.cfl")
        T = fields.load_field(tmp_path / "s.cfl")
        assert isinstance(T, Spectrum) and np.array_equal(T.values, S.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.cfl"
        p.write_bytes(b"XXXX" + bytes(40))
        with pytest.raises(ValueError):
            fields.load_field(p)
