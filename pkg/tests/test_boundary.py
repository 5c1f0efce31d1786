import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chifourier import boundary, domains
from chifourier.boundary import BoundaryError
from chifourier.fields import GridSpec, ScalarField


def disk_dmap(n, R=0.25):
    spec = GridSpec(2, n, 1.0)
    return boundary.distance_transform(domains.rasterize(domains.Disk((0.5, 0.5), R), spec))


@pytest.fixture(scope="module")
def dmap1024():
    return disk_dmap(1024)


def test_half_plane_distances():
    spec = GridSpec(2, 16, 1.0)
    v = np.zeros(spec.shape)
    v[:, 8:] = 1
    d = boundary.distance_transform(ScalarField(spec, v)).values
    assert d[3, 8] == pytest.approx(spec.h)
    assert d[3, 11] == pytest.approx(4 * spec.h)
    # the EDT does not wrap around, so column 4 is 4 cells from the interface at column 8
    assert d[3, 4] == pytest.approx(4 * spec.h)
    assert np.allclose(d, boundary.brute_force_distance(ScalarField(spec, v)))


def test_edt_matches_brute_force_on_a_disk():
    spec = GridSpec(2, 32, 1.0)
    ind = domains.rasterize(domains.Disk((0.5, 0.5), 0.2), spec)
    assert np.allclose(boundary.distance_transform(ind).values, boundary.brute_force_distance(ind), atol=1e-15)


def test_constant_indicator_rejected():
    spec = GridSpec(2, 16, 1.0)
    with pytest.raises(BoundaryError):
        boundary.distance_transform(ScalarField(spec, np.ones(spec.shape)))
    with pytest.raises(BoundaryError):
        boundary.distance_transform(ScalarField(spec, np.full(spec.shape, 0.5)))


@pytest.mark.parametrize("delta", [4 / 1024, 8 / 1024, 1 / 32, 1 / 16])
def test_disk_neighbourhood_law(dmap1024, delta):
    # |(dE)_delta| = pi (R + delta)^2 - pi (R - delta)^2 = 4 pi R delta
    assert boundary.neighborhood_volume(dmap1024, delta) == pytest.approx(4 * math.pi * 0.25 * delta, rel=0.01)


def test_neighbourhood_range(dmap1024):
    with pytest.raises(BoundaryError):
        boundary.neighborhood_volume(dmap1024, 1.5 / 1024)
    with pytest.raises(BoundaryError):
        boundary.neighborhood_volume(dmap1024, 1.5)
    assert boundary.neighborhood_volume(dmap1024, 1.0) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(2 / 1024, 0.5), st.floats(0, 0.5))
def test_neighbourhood_monotone(dmap1024, a, b):
    lo, hi = sorted((a, a + b))
    hi = min(hi, 1.0)
    assert boundary.neighborhood_volume(dmap1024, lo) <= boundary.neighborhood_volume(dmap1024, hi) + 1e-15


def test_profile_and_fit(dmap1024):
    prof = boundary.boundary_profile(dmap1024)
    assert prof.i_values[0] == 0 and prof.i_values[-1] == 9
    assert prof.deltas[-1] == pytest.approx(2 / 1024)
    assert np.all(np.diff(prof.volumes) <= 0)
    gamma, err = boundary.fit_gamma(prof)
    assert gamma == pytest.approx(1.0, abs=0.02)
    assert prof.window == (3, 9)
    assert prof.constant >= 4 * math.pi * 0.25 * 0.99


def test_fit_window_too_short(dmap1024):
    prof = boundary.boundary_profile(dmap1024)
    with pytest.raises(BoundaryError):
        boundary.fit_gamma(prof, (3, 5))


def test_profile_csv(dmap1024, tmp_path):
    prof = boundary.boundary_profile(dmap1024)
    prof.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "delta,volume,log2_delta,log2_volume" and len(lines) == prof.deltas.size + 1


def test_sickel_integral_convergence(dmap1024):
    prof = boundary.boundary_profile(dmap1024)
    # delta^(-qs) |(dE)_delta| ~ delta^(1 - qs): convergent for qs < 1, divergent for qs >= 1
    conv = boundary.sickel_integral(prof, 1.0, 0.5, 2 / 1024)
    div = boundary.sickel_integral(prof, 2.0, 0.75, 2 / 1024)
    assert not conv.divergent_trend and div.divergent_trend
    assert conv.trend_slope == pytest.approx(-0.5, abs=0.05)
    # each block is ln 2 * delta^(-1/2) * 4 pi R delta where the disk law is exact (delta <= 1/8)
    sel = conv.deltas <= 1 / 8
    exact = math.log(2) * 4 * math.pi * 0.25 * conv.deltas[sel] ** 0.5
    assert np.allclose(conv.terms[sel], exact, rtol=0.01)
    assert conv.value == pytest.approx(conv.terms.sum())


def test_fchar_integral_critical_case(dmap1024):
    prof = boundary.boundary_profile(dmap1024)
    # p = 4/3 in d=2: delta^(-2/3) (4 pi R delta)^(2/3) is constant, so the trend is flat
    crit = boundary.fchar_integral(prof, 4 / 3, 2 / 1024)
    assert crit.divergent_trend
    assert abs(crit.trend_slope) < 0.05
    sub = boundary.fchar_integral(prof, 1.6, 2 / 1024)
    assert not sub.divergent_trend


def test_integral_arguments():
    prof = boundary.boundary_profile(disk_dmap(64))
    with pytest.raises(ValueError):
        boundary.fchar_integral(prof, 2.5, 2 / 64)
    with pytest.raises(ValueError):
        boundary.sickel_integral(prof, 2.0, 1.5, 2 / 64)
    with pytest.raises(BoundaryError):
        boundary.fchar_integral(prof, 1.5, 1 / 64)
    high, low = boundary.lsq_integrals(prof, 2.0, 0.25, 2 / 64)
    # at q = 2 the two forms coincide
    assert high.value == pytest.approx(low.value)


def test_box_counting_of_a_square_and_a_snowflake():
    sq = np.array([[0.2, 0.2], [0.8, 0.2], [0.8, 0.8], [0.2, 0.8]])
    dim, _ = boundary.box_counting_dimension(sq, 2.0 ** -np.arange(3, 9))
    assert dim == pytest.approx(1.0, abs=0.05)
    k = domains.KochSnowflake((0.5, 0.5), 0.35, 7)
    dim, _ = boundary.box_counting_dimension(k.polygon.vertices, 2.0 ** -np.arange(4, 10))
    assert dim == pytest.approx(math.log(4) / math.log(3), abs=0.06)
