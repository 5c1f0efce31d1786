import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chifourier import domains, fields
from chifourier import littlewood_paley as lp
from chifourier.fields import GridSpec, ScalarField


def gaussian(spec, w):
    x = np.arange(spec.n) * spec.h - spec.box_length / 2
    X, Y = np.meshgrid(x, x, indexing="xy")
    return ScalarField(spec, np.exp(-(X * X + Y * Y) / (2 * w * w)))


@pytest.fixture(scope="module")
def smooth():
    # spectrum ~ exp(-2 pi^2 w^2 |xi|^2) is negligible well inside the half-Nyquist radius 16,
    # and the field is ~e^-22 at the box edge so the periodic copy adds no kink
    return gaussian(GridSpec(2, 256, 4.0), 0.3)


def test_k_max():
    assert lp.k_max(GridSpec(2, 2048, 1.0)) == 9
    assert lp.k_max(GridSpec(2, 1024, 8.0)) == 5
    assert lp.k_max(GridSpec(2, 64, 1.0)) == 4


def test_projection_multiplies_the_spectrum(smooth, phi0):
    k = 1
    piece = lp.project_k(smooth, phi0, k)
    S = fields.forward_transform(smooth)
    P = fields.forward_transform(piece)
    r = fields.frequency_radius(smooth.spec)
    assert np.max(np.abs(P.values - phi0.g(r / 2 ** k) ** 2 * S.values)) < 1e-12


def test_projection_rejects_unresolved_scale(smooth, phi0):
    with pytest.raises(lp.LPError):
        lp.project_k(smooth, phi0, 5)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2))
def test_projection_is_linear(phi0, a, b, k):
    spec = GridSpec(2, 128, 8.0)
    f, g = gaussian(spec, 0.3), gaussian(spec, 0.7)
    lhs = lp.project_k(ScalarField(spec, a * f.values + b * g.values), phi0, k).values
    rhs = a * lp.project_k(f, phi0, k).values + b * lp.project_k(g, phi0, k).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_low_multiplier_completes_the_partition(phi0):
    # Phi0 + (1+r^2)^(s/2) sum_{k>=1} g^4(2^-k r) = (1+r^2)^(s/2) sum_k g^4(2^-k r)
    r = np.linspace(0.01, 3.0, 200)
    s = 0.5
    high = sum(phi0.g(r * 2.0 ** -k) ** 4 for k in range(1, 61))
    total = lp.low_multiplier(phi0, r, s) + (1 + r * r) ** (s / 2) * high
    assert np.allclose(total, (1 + r * r) ** (s / 2) * phi0.quartic_sum(r), rtol=1e-10)


@pytest.mark.parametrize("s", [0.0, 0.25, 0.5])
def test_reconstruction_recovers_the_lift(smooth, phi0, s):
    dec = lp.decompose(smooth, phi0, s)
    rec = lp.reconstruct(dec)
    lift = lp.bessel_lift(smooth, s)
    err = np.max(np.abs(rec.values - lift.values)) / np.max(np.abs(lift.values))
    assert err < 1e-8


def test_square_function_streamed_matches(smooth, phi0):
    dec = lp.decompose(smooth, phi0, 0.5)
    a = lp.square_function(dec).values
    b = lp.streamed_square_function(smooth, phi0, 0.5).values
    assert np.allclose(a, b, atol=1e-14)
    manual = np.sqrt(sum((2 ** (0.5 * k) * dec.pieces[k].values) ** 2 for k in dec.ks()))
    assert np.allclose(a, manual)


def test_dyadic_report_slope_and_csv(tmp_path):
    k = np.arange(1, 9)
    rep = lp.DyadicReport("t", k, {"a": 3.0 * 2.0 ** (-0.7 * k)})
    slope, err = rep.fit_slope("a", (2, 7))
    assert slope == pytest.approx(-0.7, abs=1e-12) and err < 1e-6
    assert rep.slopes["a"]["window"] == [2, 7]
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "k,a"
    with pytest.raises(lp.LPError):
        rep.fit_slope("a", (1, 2))


def test_packet_on_a_disk(phi0):
    spec = GridSpec(2, 1024, 1.0)
    ind = domains.rasterize(domains.Disk((0.5, 0.5), 0.25), spec)
    rep = lp.verify_packet(ind, phi0, 2.0, (3, 7))
    assert rep.slopes["lp_piece"]["slope"] == pytest.approx(-0.5, abs=0.1)
    assert rep.meta["ratio_spread_lp"] < 1.5
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = lp.verify_packet(ind, phi0, 1.0, (0, 12))
    assert any("trimmed" in str(x.message) for x in w)
    assert rep.k[0] == 1 and rep.k[-1] == lp.k_max(spec)


def test_smooth_family_shape():
    fam = lp.smooth_test_family(GridSpec(2, 128, 8.0))
    assert len(fam) == 18
    assert len({name for name, _ in fam}) == 18
    with pytest.raises(lp.LPError):
        lp.smooth_test_family(GridSpec(1, 128, 8.0))


def test_lp_inequality_variants_agree(phi0):
    fam = lp.smooth_test_family(GridSpec(2, 128, 8.0))[:4]
    one = lp.verify_lp_inequality(fam, phi0, 0.5, 2.0, math.inf)
    many = lp.verify_lp_inequalities(fam, phi0, 0.5, [(2.0, 2.0), (2.0, math.inf)])
    assert many[1]["spread"] == one["spread"]
    assert many[1]["r"] == "inf" and many[0]["r"] == 2.0
    assert one["finite_positive"] and 1 <= one["spread"] < 10
