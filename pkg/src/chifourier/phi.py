"""Radial Littlewood-Paley function built from a smooth compactly supported bump.

The base bump ``psi0(x) = c exp(-1/(1 - |2x|^2))`` (planar, support radius 1/2,
unit mass) has a radial transform ``psi0_hat``.  The difference
``phi(eta) = psi0_hat(eta) - psi0_hat(2 eta)`` vanishes at the origin, and the
working piece ``g(xi) = phi(2^-N |xi|)^(2^N)`` has vanishing derivatives through
order ``2^N - 1`` at the origin while its inverse transform stays supported in
the unit ball.

``psi0_hat`` is tabulated by composite Gauss-Legendre quadrature of the Hankel
integral.  Below ``r = 1`` it is evaluated from its exact even power series
(so derivatives at the origin are clean), above that by a cubic spline in
``log r``, and it is taken as zero past the tabulated range.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.special import exp1

from .special import j0

__all__ = [
    "PhiError",
    "BumpSpec",
    "RadialProfile",
    "PhiFunction",
    "Multiplier",
    "psi0",
    "tabulate_psi0_hat",
    "build_phi",
    "certify_partition",
    "moment_check",
    "multiplier_m",
    "multiplier_m_prime",
    "mikhlin_check",
    "fd_weights",
    "certification_dict",
]

MAX_ORDER = 4
SERIES_RADIUS = 1.0
_SERIES_TERMS = 40
_TAIL_TOL = 1e-10
_QUAD_TOL = 1e-9
_MAX_PANELS = 4096

# psi0 has unit mass: 2 pi c int_0^(1/2) e^(-1/(1-4r^2)) r dr = (pi c / 4)(e^-1 - E1(1))
PSI0_NORM = 4.0 / (math.pi * (math.exp(-1.0) - float(exp1(1.0))))


class PhiError(ValueError):
    pass


@dataclass(frozen=True)
class BumpSpec:
    """Quadrature and tabulation settings for ``psi0_hat``.

    Parameters
    ----------
    panels : int
        Composite Gauss-Legendre panels on ``[0, 1/2]``; doubled until
        successive results agree to ``1e-9``.
    order : int
        Gauss points per panel.
    r_max : float
        Largest tabulated radius (at least 64).
    per_octave : int
        Geometric nodes per octave on ``[1, r_max]``; 256 keeps the spline
        error near 6e-11 where the profile oscillates fastest relative to the node spacing.
    linear_nodes : int
        Uniform nodes on ``[0, 1)``.
    """

    panels: int = 128
    order: int = 32
    r_max: float = 256.0
    per_octave: int = 256
    linear_nodes: int = 64

    def __post_init__(self):
        if self.r_max < 64:
            raise PhiError(f"r_max={self.r_max} below 64")
        if self.panels < 1 or self.order < 2 or self.per_octave < 4 or self.linear_nodes < 2:
            raise PhiError("bump quadrature settings too coarse")


def psi0(rho):
    """The unit-mass bump as a function of radius."""
    rho = np.asarray(rho, dtype=np.float64)
    out = np.zeros_like(rho)
    m = rho < 0.5
    out[m] = PSI0_NORM * np.exp(-1.0 / (1.0 - 4.0 * rho[m] ** 2))
    return out


def _gauss_panels(panels: int, order: int):
    x, w = leggauss(order)
    edges = np.linspace(0.0, 0.5, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return ((b - a) / 2 * x + (a + b) / 2).ravel(), ((b - a) / 2 * w).ravel()


def _hankel(r: np.ndarray, panels: int, order: int) -> np.ndarray:
    rho, w = _gauss_panels(panels, order)
    weight = psi0(rho) * rho * w
    out = np.empty(r.shape)
    # blocks keep the (radii x nodes) Bessel matrix small
    for lo in range(0, r.size, 64):
        rr = r[lo:lo + 64]
        out[lo:lo + 64] = 2 * np.pi * (j0(2 * np.pi * np.outer(rr, rho)) @ weight)
    return out


def _series_coefficients(panels: int, order: int) -> np.ndarray:
    # psi0_hat(r) = sum_k a_k r^(2k),  a_k = (-1)^k pi^(2k) / (k!)^2 * 2 pi int psi0 rho^(2k+1)
    rho, w = _gauss_panels(panels, order)
    base = psi0(rho) * rho * w
    coeffs = np.empty(_SERIES_TERMS)
    for k in range(_SERIES_TERMS):
        moment = 2 * np.pi * np.sum(base * rho ** (2 * k))
        coeffs[k] = (-1) ** k * math.pi ** (2 * k) / math.factorial(k) ** 2 * moment
    return coeffs


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Tabulated radial function with a series core and a log-spline tail.

    Attributes
    ----------
    radii, values : ndarray
        Nodes and stored values.  Nodes below ``SERIES_RADIUS`` hold the
        series values, the rest hold quadrature values.
    quad_error : ndarray
        Node-doubling error estimate of the quadrature at each node.
    """

    radii: np.ndarray
    values: np.ndarray
    quad_error: np.ndarray
    coeffs: np.ndarray
    r_max: float
    _spline: CubicSpline = field(repr=False)

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=np.float64))
        out = np.zeros_like(r)
        core = r < SERIES_RADIUS
        if np.any(core):
            out[core] = np.polynomial.polynomial.polyval(r[core] ** 2, self.coeffs)
        mid = (~core) & (r <= self.r_max)
        if np.any(mid):
            out[mid] = self._spline(np.log(r[mid]))
        return out if out.ndim else float(out)

    def series(self, r):
        """Even power series; valid for complex or real ``r`` of moderate size."""
        return np.polynomial.polynomial.polyval(np.asarray(r) ** 2, self.coeffs)

    def to_csv(self, path) -> None:
        rows = ["r,value"] + [f"{r!r},{v!r}" for r, v in zip(self.radii.tolist(), self.values.tolist())]
        Path(path).write_text("\n".join(rows) + "\n")


def _nodes(spec: BumpSpec) -> tuple[np.ndarray, np.ndarray]:
    lin = np.arange(spec.linear_nodes) * (SERIES_RADIUS / spec.linear_nodes)
    octaves = math.log2(spec.r_max / SERIES_RADIUS)
    count = int(math.ceil(octaves * spec.per_octave)) + 1
    geo = SERIES_RADIUS * np.exp2(np.linspace(0.0, octaves, count))
    return lin, geo


@functools.lru_cache(maxsize=8)
def tabulate_psi0_hat(spec: BumpSpec = BumpSpec()) -> RadialProfile:
    """Tabulate ``psi0_hat(r) = 2 pi int_0^(1/2) psi0(rho) J0(2 pi r rho) rho d rho``.

    Raises
    ------
    PhiError
        If node doubling does not reach ``1e-9`` by 4096 panels; the message
        names the worst node.
    """
    lin, geo = _nodes(spec)
    radii = np.concatenate([lin, geo])
    panels = spec.panels
    coarse = _hankel(radii, panels, spec.order)
    while True:
        fine = _hankel(radii, 2 * panels, spec.order)
        err = np.abs(fine - coarse)
        if err.max() < _QUAD_TOL:
            break
        if 2 * panels >= _MAX_PANELS:
            worst = int(np.argmax(err))
            raise PhiError(f"quadrature did not converge: worst node r={radii[worst]:g}, "
                           f"error {err[worst]:.3e}")
        panels, coarse = 2 * panels, fine
    coeffs = _series_coefficients(2 * panels, spec.order)
    values = fine.copy()
    core = radii < SERIES_RADIUS
    values[core] = np.polynomial.polynomial.polyval(radii[core] ** 2, coeffs)
    # the series at the core nodes doubles as a check of the quadrature there
    err[core] = np.maximum(err[core], np.abs(values[core] - fine[core]))
    spline = CubicSpline(np.log(geo), values[~core])
    for a in (radii, values, err, coeffs):
        a.flags.writeable = False
    return RadialProfile(radii, values, err, coeffs, float(spec.r_max), spline)


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """``phi(eta) = psi0_hat(eta) - psi0_hat(2 eta)`` and its working piece ``g``.

    ``g(xi) = phi(2^-N |xi|)^(2^N)``; the dilation keeps ``g^vee`` supported
    in the unit ball.
    """

    N: int
    profile: RadialProfile
    support_radius: float = 1.0

    @property
    def power(self) -> int:
        return 2 ** self.N

    def phi(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        return self.profile(eta) - self.profile(2.0 * eta)

    def g(self, r):
        """Working piece as a function of ``|xi|``."""
        r = np.asarray(r, dtype=np.float64)
        return self.phi(r * 2.0 ** -self.N) ** self.power

    def __call__(self, xi):
        """Working piece at points ``xi`` (last axis holds the coordinates)."""
        xi = np.asarray(xi, dtype=np.float64)
        return self.g(np.sqrt(np.sum(xi * xi, axis=-1)))

    def quartic_sum(self, r, k_lo: int = -60, k_hi: int = 60):
        """``sum_j g^4(2^-j r)`` over ``j in [k_lo, k_hi]``."""
        return _dyadic_sum(self, np.asarray(r, dtype=np.float64), 4, k_lo, k_hi)

    def decay_constant(self) -> float:
        """``max |phi(eta)| (1 + eta)^8`` over the tabulated range."""
        eta = self.profile.radii
        return float(np.max(np.abs(self.phi(eta)) * (1.0 + eta) ** 8))


def build_phi(N: int = 0, spec: BumpSpec = BumpSpec()) -> PhiFunction:
    """Build the working piece for moment order ``N`` (``0 <= N <= 4``).

    Raises
    ------
    PhiError
        If ``N`` is out of range, or the truncated tail of ``g`` exceeds
        ``1e-10`` (tabulate further out).
    """
    if not isinstance(N, (int, np.integer)) or not 0 <= N <= MAX_ORDER:
        raise PhiError(f"N={N} outside [0, {MAX_ORDER}]")
    profile = tabulate_psi0_hat(spec)
    # zeroing psi0_hat past r_max costs at most its size on the last octave, raised to 2^N
    last = profile.radii[profile.radii >= profile.r_max / 2]
    tail = float(np.max(np.abs(profile(last)))) ** (2 ** N)
    if tail > _TAIL_TOL:
        raise PhiError(f"tabulated range r_max={profile.r_max:g} too short for N={N} "
                       f"(tail {tail:.2e}); use a larger r_max")
    return PhiFunction(int(N), profile)


def _dyadic_sum(phi: PhiFunction, r: np.ndarray, power: int, k_lo: int, k_hi: int) -> np.ndarray:
    total = np.zeros(r.shape)
    for k in range(k_lo, k_hi + 1):
        total += phi.g(r * 2.0 ** -k) ** power
    return total


@dataclass
class PartitionCertificate:
    C1: float
    C2: float
    C1_quartic: float
    C2_quartic: float
    annulus: tuple[float, float]
    K: int
    boundary_term: float

    def to_dict(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "C1_quartic": self.C1_quartic,
                "C2_quartic": self.C2_quartic, "annulus": list(self.annulus), "K": self.K,
                "boundary_term": self.boundary_term}


def certify_partition(phi: PhiFunction, annulus: tuple[float, float] = (1.0, 2.0),
                      K: int = 60, samples: int = 4097) -> PartitionCertificate:
    """Bounds of ``sum_{|k|<=K} g^2(2^-k xi)`` and of the quartic sum on an annulus.

    ``g`` is radial, so a dense sample of radii covers the annulus.

    Raises
    ------
    PhiError
        If either lower bound is at most ``1e-12``.
    """
    a, b = annulus
    r = np.linspace(a, b, samples)
    sq = _dyadic_sum(phi, r, 2, -K, K)
    qu = _dyadic_sum(phi, r, 4, -K, K)
    edge = float(max(np.max(phi.g(r * 2.0 ** -K) ** 2), np.max(phi.g(r * 2.0 ** K) ** 2)))
    cert = PartitionCertificate(float(sq.min()), float(sq.max()), float(qu.min()), float(qu.max()),
                                (float(a), float(b)), K, edge)
    if cert.C1 <= 1e-12 or cert.C1_quartic <= 1e-12:
        raise PhiError(f"partition lower bound vanishes (C1={cert.C1:.3e}, C1'={cert.C1_quartic:.3e})")
    return cert


def fd_weights(order: int, offsets) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 (Fornberg's recursion)."""
    x = np.asarray(offsets, dtype=np.float64)
    n = x.size
    if order >= n:
        raise ValueError("need more stencil points than the derivative order")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for m in range(min(i, order), -1, -1):
                prev = c[i - 1, m - 1] if m > 0 else 0.0
                c[i, m] = c1 * (m * prev - x[i - 1] * c[i - 1, m]) / c2
            for m in range(min(i, order), -1, -1):
                prev = c[j, m - 1] if m > 0 else 0.0
                c[j, m] = (x[i] * c[j, m] - m * prev) / c3
        c1 = c2
    return c[:, order]


def _central_stencil(order: int, step: float):
    half = order // 2 + 3
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    return offsets * step, fd_weights(order, offsets) / step ** order


def moment_check(phi: PhiFunction, beta_max: int | None = None, step: float = 1e-2) -> list[dict]:
    """``|int x^beta g^vee dx| = |d^beta g(0)| / (2 pi)^|beta|`` for ``|beta| <= beta_max``.

    Mixed derivatives come from tensor-product central differences.
    ``beta_max`` defaults to ``2^N - 1``.
    """
    if beta_max is None:
        beta_max = phi.power - 1
    if beta_max >= phi.power:
        raise PhiError(f"beta_max={beta_max} must be below 2^N={phi.power}")
    table = []
    for total in range(beta_max + 1):
        for b1 in range(total, -1, -1):
            b2 = total - b1
            x1, w1 = _central_stencil(b1, step)
            x2, w2 = _central_stencil(b2, step)
            pts = np.stack(np.meshgrid(x1, x2, indexing="ij"), axis=-1)
            deriv = float(w1 @ phi(pts) @ w2)
            table.append({"beta": [b1, b2], "moment": abs(deriv) / (2 * np.pi) ** total})
    return table


class Multiplier:
    """Radial frequency multiplier; call on points (last axis) or use :meth:`radial`."""

    def __init__(self, radial, label: str):
        self._radial = radial
        self.label = label

    def radial(self, r):
        return self._radial(np.asarray(r, dtype=np.float64))

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        return self._radial(np.sqrt(np.sum(xi * xi, axis=-1)))


def multiplier_m(phi: PhiFunction, k: int, s: float) -> Multiplier:
    """``m_k(xi) = 2^(ks) g^2(2^-k xi) (1 + |xi|^2)^(-s/2)``."""
    def f(r):
        return 2.0 ** (k * s) * phi.g(r * 2.0 ** -k) ** 2 * (1.0 + r * r) ** (-s / 2)
    return Multiplier(f, f"m_{k}")


def multiplier_m_prime(phi: PhiFunction, k: int, s: float, K: int = 60) -> Multiplier:
    """``m'_k(xi) = 2^(-ks) g^2(2^-k xi) (1 + |xi|^2)^(s/2) / sum_j g^4(2^-j xi)``."""
    def f(r):
        num = 2.0 ** (-k * s) * phi.g(r * 2.0 ** -k) ** 2 * (1.0 + r * r) ** (s / 2)
        den = phi.quartic_sum(r, -K, K)
        safe = den > 0
        return np.where(safe, num / np.where(safe, den, 1.0), 0.0)
    return Multiplier(f, f"m'_{k}")


_ALPHAS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
# (offset, weight) pairs in units of the step for each derivative
_FD = {
    (0, 0): [((0, 0), 1.0)],
    (1, 0): [((1, 0), 0.5), ((-1, 0), -0.5)],
    (0, 1): [((0, 1), 0.5), ((0, -1), -0.5)],
    (2, 0): [((1, 0), 1.0), ((0, 0), -2.0), ((-1, 0), 1.0)],
    (0, 2): [((0, 1), 1.0), ((0, 0), -2.0), ((0, -1), 1.0)],
    (1, 1): [((1, 1), 0.25), ((1, -1), -0.25), ((-1, 1), -0.25), ((-1, -1), 0.25)],
}


@dataclass
class MikhlinReport:
    family: str
    s: float
    k_range: tuple[int, int]
    octaves: np.ndarray
    # table[alpha][pattern, octave] = max |xi|^|alpha| |d^alpha sum w_k m_k| on that octave
    table: dict
    bound: float
    spread: float
    growth_slope: float
    certified: bool

    def to_dict(self) -> dict:
        return {"family": self.family, "s": self.s, "k_range": list(self.k_range),
                "octaves": self.octaves.tolist(), "bound": self.bound, "spread": self.spread,
                "growth_slope": self.growth_slope, "certified": self.certified,
                "octave_max": {f"{a[0]}{a[1]}": np.max(t, axis=0).tolist() for a, t in self.table.items()}}


def mikhlin_check(phi: PhiFunction, s: float = 0.5, family: str = "m", k_range=(1, 20),
                  patterns: int = 50, seed: int = 0, alpha_max: int = 2, per_octave: int = 24,
                  rel_step: float = 1e-3, signs: np.ndarray | None = None) -> MikhlinReport:
    """Scaled finite-difference derivatives of random-sign sums ``sum_k w_k m_k``.

    Radii are log-spaced with ``per_octave`` samples per octave along three
    off-axis directions.  The per-octave maxima are reported for the interior
    octaves ``[k_lo, k_hi - 1]``; ``spread`` is the ratio of the largest to the
    smallest of them (over patterns, alphas with nonzero table and octaves) and
    ``growth_slope`` the fitted log2 trend of the octave maxima.

    ``signs`` overrides the random patterns (shape ``(patterns, K)``).
    """
    if family not in ("m", "m_prime"):
        raise PhiError(f"unknown multiplier family {family!r}")
    k_lo, k_hi = k_range
    ks = np.arange(k_lo, k_hi + 1)
    if signs is None:
        rng = np.random.default_rng(seed)
        signs = rng.choice([-1.0, 1.0], size=(patterns, ks.size))
    signs = np.asarray(signs, dtype=np.float64)
    octaves = np.arange(k_lo, k_hi)
    radii = np.exp2(np.arange(k_lo * per_octave, k_hi * per_octave) / per_octave)
    angles = np.array([0.3, 1.1, 2.0])
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    centers = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    rad = np.repeat(radii, angles.size)
    step = rel_step * rad
    alphas = [a for a in _ALPHAS if sum(a) <= alpha_max]
    offsets = sorted({o for a in alphas for o, _ in _FD[a]})
    mult = multiplier_m if family == "m" else multiplier_m_prime
    # one matrix per stencil offset: values[offset][point, k]
    values = {}
    for o in offsets:
        pts = centers + np.asarray(o, dtype=np.float64)[None, :] * step[:, None]
        r = np.hypot(pts[:, 0], pts[:, 1])
        values[o] = np.stack([mult(phi, int(k), s).radial(r) for k in ks], axis=1)
    octave_of = np.floor(np.log2(rad) + 1e-12).astype(int)
    table = {}
    for a in alphas:
        d = sum(w * values[o] for o, w in _FD[a]) / step[:, None] ** sum(a)
        scaled = np.abs(d @ signs.T) * rad[:, None] ** sum(a)
        t = np.empty((signs.shape[0], octaves.size))
        for j, oc in enumerate(octaves):
            t[:, j] = scaled[octave_of == oc].max(axis=0)
        table[a] = t
    stacked = np.concatenate([t.ravel() for t in table.values()])
    bound = float(stacked.max())
    spreads, slopes = [], []
    for t in table.values():
        spreads.append(float(t.max() / t.min()) if t.min() > 0 else math.inf)
        slopes.append(float(np.polyfit(octaves, np.log2(np.max(t, axis=0)), 1)[0]))
    spread = max(spreads)
    slope = max(slopes, key=abs)
    certified = bool(np.isfinite(bound) and spread < 10.0 and abs(slope) < 0.1)
    return MikhlinReport(family, float(s), (int(k_lo), int(k_hi)), octaves, table, bound,
                         spread, slope, certified)


def certification_dict(phi: PhiFunction, s: float = 0.5, seed: int = 0, patterns: int = 50) -> dict:
    """JSON-ready certification bundle."""
    cert = certify_partition(phi)
    moments = moment_check(phi)
    mk = mikhlin_check(phi, s=s, family="m", seed=seed, patterns=patterns)
    mp = mikhlin_check(phi, s=s, family="m_prime", seed=seed, patterns=patterns)
    return {"N": phi.N, "phi0": float(phi.phi(0.0)), **cert.to_dict(),
            "moment_table": moments, "mikhlin_table": {"m": mk.to_dict(), "m_prime": mp.to_dict()},
            "decay_constant": phi.decay_constant()}


def save_certification(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")

