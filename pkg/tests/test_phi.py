import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from chifourier import phi as phimod
from chifourier.phi import PhiError


def quad_psi0_hat(r):
    # independent oracle: adaptive quadrature with scipy's J0
    f = lambda rho: 2 * np.pi * phimod.psi0(rho) * rho * special.j0(2 * np.pi * r * rho)
    val, _ = integrate.quad(f, 0, 0.5, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def test_bump_has_unit_mass():
    mass, _ = integrate.quad(lambda rho: 2 * np.pi * rho * float(phimod.psi0(rho)), 0, 0.5, epsabs=1e-14)
    assert mass == pytest.approx(1.0, abs=1e-12)
    assert float(phimod.psi0(0.5)) == 0.0 and float(phimod.psi0(0.7)) == 0.0


@pytest.mark.parametrize("r", [0.0, 0.3, 0.99, 1.0, 1.7, 5.3, 9.2, 17.0, 63.5, 200.0])
def test_transform_table_against_quadrature(phi0, r):
    assert float(phi0.profile(r)) == pytest.approx(quad_psi0_hat(r), abs=1e-10)


def test_transform_at_origin_is_mass(phi0):
    assert float(phi0.profile(0.0)) == pytest.approx(1.0, abs=1e-13)
    assert np.max(phi0.profile.quad_error) < 1e-9


def test_phi_vanishes_at_origin(phi0, phi1):
    for ph in (phi0, phi1):
        assert abs(float(ph.phi(0.0))) < 1e-12
        assert abs(float(ph.g(0.0))) < 1e-12


def test_working_piece_is_radial(phi1):
    xi = np.array([[3.0, 4.0], [5.0, 0.0], [0.0, -5.0]])
    vals = phi1(xi)
    assert np.allclose(vals, vals[0], rtol=0, atol=1e-15)
    assert vals[0] == pytest.approx(float(phi1.g(5.0)))


def test_partition_bounds_and_dilation_invariance(phi0):
    a = phimod.certify_partition(phi0)
    b = phimod.certify_partition(phi0, (4.0, 8.0))
    assert a.C1 > 0 and a.C1_quartic > 0 and a.C1 <= a.C2
    for f in ("C1", "C2", "C1_quartic", "C2_quartic"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-8)
    assert a.boundary_term < 1e-12


@pytest.mark.parametrize("N", [0, 1, 2])
def test_vanishing_moments(N):
    ph = phimod.build_phi(N)
    table = phimod.moment_check(ph)
    assert len(table) == sum(t + 1 for t in range(2 ** N))
    assert max(row["moment"] for row in table) < 1e-6


def test_moment_order_limit(phi1):
    with pytest.raises(PhiError):
        phimod.moment_check(phi1, beta_max=2)


def test_build_rejects_bad_order():
    with pytest.raises(PhiError):
        phimod.build_phi(5)
    with pytest.raises(PhiError):
        phimod.build_phi(-1)
    with pytest.raises(PhiError):
        phimod.BumpSpec(r_max=32)


def test_fd_weights_known_stencils():
    assert np.allclose(phimod.fd_weights(1, [-1, 0, 1]), [-0.5, 0, 0.5])
    assert np.allclose(phimod.fd_weights(2, [-1, 0, 1]), [1, -2, 1])
    with pytest.raises(ValueError):
        phimod.fd_weights(3, [0, 1, 2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 4), st.lists(st.floats(-3, 3), min_size=5, max_size=5))
def test_fd_weights_exact_on_polynomials(order, coeffs):
    # a 7-point stencil differentiates polynomials of degree <= 6 exactly
    offsets = np.arange(-3, 4, dtype=float)
    w = phimod.fd_weights(order, offsets)
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.deriv(order)(0.0) if order else poly(0.0)
    assert w @ poly(offsets) == pytest.approx(exact, abs=1e-9 * (1 + np.abs(coeffs).sum()))


def test_multiplier_definitions(phi0):
    r = np.array([0.5, 3.0, 40.0])
    m = phimod.multiplier_m(phi0, 3, 0.5).radial(r)
    assert np.allclose(m, 2 ** 1.5 * phi0.g(r / 8) ** 2 * (1 + r * r) ** -0.25)
    mp = phimod.multiplier_m_prime(phi0, 3, 0.5).radial(r)
    q = phi0.quartic_sum(r)
    assert np.allclose(mp, 2 ** -1.5 * phi0.g(r / 8) ** 2 * (1 + r * r) ** 0.25 / q)


@pytest.mark.parametrize("family", ["m", "m_prime"])
def test_mikhlin_bounds(phi0, family):
    rep = phimod.mikhlin_check(phi0, s=0.5, family=family, k_range=(1, 12), patterns=20, seed=1)
    assert rep.certified
    assert rep.spread < 10 and abs(rep.growth_slope) < 0.1
    d = rep.to_dict()
    assert set(d["octave_max"]) == {"00", "10", "01", "20", "11", "02"}


def test_mikhlin_is_seeded(phi0):
    a = phimod.mikhlin_check(phi0, k_range=(1, 8), patterns=5, seed=3)
    b = phimod.mikhlin_check(phi0, k_range=(1, 8), patterns=5, seed=3)
    assert a.bound == b.bound and a.spread == b.spread


def test_mikhlin_rejects_unknown_family(phi0):
    with pytest.raises(PhiError):
        phimod.mikhlin_check(phi0, family="q")


def test_profile_csv(phi0, tmp_path):
    phi0.profile.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "r,value"
    r, v = map(float, lines[5].split(","))
    assert v == pytest.approx(float(phi0.profile(r)), abs=1e-14)


def test_decay_constant_finite(phi0):
    c = phi0.decay_constant()
    assert math.isfinite(c) and c > 0
