"""Dyadic frequency projections, square functions and Lorentz-Sobolev checks.

``P_k f`` multiplies the spectrum by ``g^2(2^-k xi)`` and the low part
``P_{<=0} f`` by ``Phi0(xi) = (1 + |xi|^2)^(s/2) sum_{k<=0} g^4(2^-k xi)``,
where ``g`` is the working piece of :class:`~chifourier.phi.PhiFunction`.
Pieces are formed only for ``2^k <= n / (4L)`` (half Nyquist).

Real fields go through ``rfftn`` with the same quadrature weights as
:func:`~chifourier.fields.forward_transform`, which halves memory and time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
from scipy import stats

from . import fields
from .fields import GridSpec, ScalarField, lorentz_quasinorm
from .phi import PhiFunction

__all__ = [
    "LPError",
    "LPDecomposition",
    "DyadicReport",
    "k_max",
    "half_spectrum",
    "project_k",
    "project_low",
    "low_multiplier",
    "bessel_lift",
    "decompose",
    "square_function",
    "streamed_square_function",
    "reconstruct",
    "verify_packet",
    "verify_lp_inequality",
    "verify_lp_inequalities",
    "smooth_test_family",
]

LOW_TRUNCATION = 1e-12


class LPError(ValueError):
    pass


def k_max(spec: GridSpec) -> int:
    """Largest ``k`` with ``2^k <= n / (4L)``."""
    return int(math.floor(math.log2(spec.half_nyquist) + 1e-12))


@dataclass(frozen=True, eq=False)
class HalfSpectrum:
    """``h^dim * rfftn(f)`` with the matching ``|xi|`` array (uncentered layout)."""

    spec: GridSpec
    values: np.ndarray
    radius: np.ndarray


def _half_radius(spec: GridSpec) -> np.ndarray:
    axes = [scipy.fft.fftfreq(spec.n, d=spec.h)] * (spec.dim - 1) + [scipy.fft.rfftfreq(spec.n, d=spec.h)]
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    return np.sqrt(sum(g * g for g in grids))


def half_spectrum(f: ScalarField) -> HalfSpectrum:
    spec = f.spec
    F = scipy.fft.rfftn(f.values, workers=fields.fft_workers())
    F *= spec.cell_measure
    return HalfSpectrum(spec, F, _half_radius(spec))


def _invert(hs: HalfSpectrum, multiplier) -> np.ndarray:
    spec = hs.spec
    out = scipy.fft.irfftn(hs.values * multiplier, s=spec.shape, workers=fields.fft_workers())
    out /= spec.cell_measure
    return out


def _check_k(spec: GridSpec, k: int) -> None:
    if 2.0 ** k > spec.half_nyquist * (1 + 1e-12):
        raise LPError(f"k={k}: 2^k exceeds the half-Nyquist radius n/(4L)={spec.half_nyquist:g}")


def _as_half(f) -> HalfSpectrum:
    return f if isinstance(f, HalfSpectrum) else half_spectrum(f)


def project_k(f: ScalarField | HalfSpectrum, phi: PhiFunction, k: int) -> ScalarField:
    """``P_k f = (g^2(2^-k xi) f_hat)^vee``."""
    hs = _as_half(f)
    _check_k(hs.spec, k)
    return ScalarField._wrap(hs.spec, _invert(hs, phi.g(hs.radius * 2.0 ** -k) ** 2))


def project_phi(f: ScalarField | HalfSpectrum, phi: PhiFunction, k: int) -> ScalarField:
    """``(g(2^-k xi) f_hat)^vee`` (single power of the piece)."""
    hs = _as_half(f)
    _check_k(hs.spec, k)
    return ScalarField._wrap(hs.spec, _invert(hs, phi.g(hs.radius * 2.0 ** -k)))


def low_multiplier(phi: PhiFunction, r: np.ndarray, s: float, tol: float = LOW_TRUNCATION) -> np.ndarray:
    """``Phi0(r)``; the sum over ``k <= 0`` stops once terms past the peak fall below ``tol``.

    At ``r = 0`` every ``g`` vanishes, so the value there is taken as the
    limit along ``r = 2^-m``, i.e. ``sum_j g^4(2^j)``. On a periodic grid the
    zero mode carries the mean, which would otherwise be dropped.
    """
    r = np.asarray(r, dtype=np.float64)
    nonzero = r[r > 0]
    r_min = float(nonzero.min()) if nonzero.size else 1.0
    total = np.zeros(r.shape)
    j = 0
    while True:
        term = phi.g(r * 2.0 ** j) ** 4
        total += term
        past_peak = r_min * 2.0 ** j > 2.0 ** (phi.N + 1)
        if (past_peak and term.max() < tol) or j > 200:
            break
        j += 1
    total = np.where(r == 0, phi.quartic_sum(1.0), total)
    return (1.0 + r * r) ** (s / 2) * total


def project_low(f: ScalarField | HalfSpectrum, phi: PhiFunction, s: float) -> ScalarField:
    """``P_{<=0} f = (Phi0 f_hat)^vee``."""
    hs = _as_half(f)
    return ScalarField._wrap(hs.spec, _invert(hs, low_multiplier(phi, hs.radius, s)))


def bessel_lift(f: ScalarField | HalfSpectrum, s: float) -> ScalarField:
    """``f_s = ((1 + |xi|^2)^(s/2) f_hat)^vee``."""
    hs = _as_half(f)
    return ScalarField._wrap(hs.spec, _invert(hs, (1.0 + hs.radius ** 2) ** (s / 2)))


@dataclass(frozen=True, eq=False)
class LPDecomposition:
    """Pieces ``P_k f`` for ``k`` in ``k_range`` plus the low piece, at smoothness ``s``."""

    spec: GridSpec
    s: float
    k_range: tuple[int, int]
    pieces: dict
    low: ScalarField
    phi: PhiFunction = field(repr=False)

    def ks(self) -> list[int]:
        return list(range(self.k_range[0], self.k_range[1] + 1))


def decompose(f: ScalarField, phi: PhiFunction, s: float, k_range: tuple[int, int] | None = None) -> LPDecomposition:
    hs = half_spectrum(f)
    if k_range is None:
        k_range = (1, k_max(f.spec))
    lo, hi = k_range
    if hi < lo:
        raise LPError(f"empty k range {k_range}")
    pieces = {k: project_k(hs, phi, k) for k in range(lo, hi + 1)}
    return LPDecomposition(f.spec, float(s), (int(lo), int(hi)), pieces, project_low(hs, phi, s), phi)


def square_function(decomp: LPDecomposition) -> ScalarField:
    """``(sum_k (2^(ks) |P_k f|)^2)^(1/2)``."""
    acc = np.zeros(decomp.spec.shape)
    for k, piece in decomp.pieces.items():
        acc += (2.0 ** (k * decomp.s) * piece.values) ** 2
    return ScalarField._wrap(decomp.spec, np.sqrt(acc))


def streamed_square_function(f: ScalarField | HalfSpectrum, phi: PhiFunction, s: float,
                             k_range: tuple[int, int] | None = None) -> ScalarField:
    """Square function without keeping the pieces (one piece in memory at a time)."""
    hs = _as_half(f)
    if k_range is None:
        k_range = (1, k_max(hs.spec))
    acc = np.zeros(hs.spec.shape)
    for k in range(k_range[0], k_range[1] + 1):
        piece = project_k(hs, phi, k).values
        acc += (2.0 ** (k * s) * piece) ** 2
    return ScalarField._wrap(hs.spec, np.sqrt(acc))


def reconstruct(decomp: LPDecomposition, K: int = 60) -> ScalarField:
    """Re-sum ``sum_k m'_k 2^(ks) P_k f + P_{<=0} f / Q`` where ``Q = sum_j g^4(2^-j xi)``.

    Equals ``f_s`` up to the spectral mass of ``f`` outside the formed pieces.
    """
    phi = decomp.phi
    spec = decomp.spec
    r = _half_radius(spec)
    q = np.where(r == 0, phi.quartic_sum(1.0), phi.quartic_sum(r, -K, K))
    inv_q = np.where(q > 0, 1.0 / np.where(q > 0, q, 1.0), 0.0)
    lift = (1.0 + r * r) ** (decomp.s / 2)
    acc = half_spectrum(decomp.low).values * inv_q
    for k, piece in decomp.pieces.items():
        # m'_k * 2^(ks) = g^2(2^-k xi) (1+|xi|^2)^(s/2) / Q
        acc = acc + half_spectrum(piece).values * phi.g(r * 2.0 ** -k) ** 2 * lift * inv_q
    hs = HalfSpectrum(spec, acc, r)
    return ScalarField._wrap(spec, _invert(hs, 1.0))


@dataclass
class DyadicReport:
    """Per-scale table keyed by ``k`` with fitted log2 slopes."""

    name: str
    k: np.ndarray
    columns: dict
    slopes: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def fit_slope(self, column: str, window: tuple[int, int] | None = None) -> tuple[float, float]:
        """OLS slope of ``log2(column)`` against ``k`` over ``window`` (inclusive)."""
        sel = np.ones(self.k.size, dtype=bool)
        if window is not None:
            sel = (self.k >= window[0]) & (self.k <= window[1])
        y = np.asarray(self.columns[column])[sel]
        if np.count_nonzero(sel) < 3 or np.any(y <= 0):
            raise LPError(f"cannot fit {column!r} over {window}")
        res = stats.linregress(self.k[sel].astype(np.float64), np.log2(y))
        win = [int(self.k[sel].min()), int(self.k[sel].max())]
        self.slopes[column] = {"slope": float(res.slope), "stderr": float(res.stderr), "window": win}
        return float(res.slope), float(res.stderr)

    def to_csv(self, path) -> None:
        names = list(self.columns)
        rows = [",".join(["k"] + names)]
        for i, k in enumerate(self.k.tolist()):
            rows.append(",".join([str(k)] + [repr(float(self.columns[c][i])) for c in names]))
        Path(path).write_text("\n".join(rows) + "\n")

    def to_dict(self) -> dict:
        return {"name": self.name, "k": self.k.tolist(),
                "columns": {c: np.asarray(v, dtype=np.float64).tolist() for c, v in self.columns.items()},
                "slopes": self.slopes, "meta": self.meta}


def verify_packet(indicator: ScalarField, phi: PhiFunction, p: float, k_range: tuple[int, int] | None = None,
                  dmap=None) -> DyadicReport:
    """Dyadic pieces of an indicator against boundary-neighbourhood volumes.

    Columns: ``phi_piece`` = ``||(g(2^-k xi) chi_hat)^vee||_p``, ``lp_piece`` =
    ``||P_k chi||_p``, ``nbhd`` = ``|(dE)_{2^-k}|^(1/p)``, ``nbhd_prev`` =
    ``|(dE)_{2^-k+1}|^(1/p)`` and the two ratios.  ``k`` outside the
    resolvable band is trimmed with a warning.
    """
    from .boundary import distance_transform, neighborhood_volume

    spec = indicator.spec
    top = k_max(spec)
    # delta = 2^-k must stay at or above 2h
    top = min(top, int(math.floor(math.log2(1.0 / (2 * spec.h)) + 1e-12)))
    lo, hi = k_range if k_range is not None else (1, top)
    if lo < 1 or hi > top:
        warnings.warn(f"k range ({lo}, {hi}) trimmed to the resolvable band [1, {top}]", stacklevel=2)
        lo, hi = max(lo, 1), min(hi, top)
    if hi - lo < 2:
        raise LPError("fewer than 3 resolvable scales")
    if dmap is None:
        dmap = distance_transform(indicator)
    hs = half_spectrum(indicator)
    ks = np.arange(lo, hi + 1)
    cols = {name: np.empty(ks.size) for name in ("phi_piece", "lp_piece", "nbhd", "nbhd_prev")}
    for i, k in enumerate(ks.tolist()):
        cols["phi_piece"][i] = fields.lp_norm(project_phi(hs, phi, k), p)
        cols["lp_piece"][i] = fields.lp_norm(project_k(hs, phi, k), p)
        cols["nbhd"][i] = neighborhood_volume(dmap, 2.0 ** -k) ** (1.0 / p)
        cols["nbhd_prev"][i] = neighborhood_volume(dmap, min(2.0 ** (1 - k), spec.box_length)) ** (1.0 / p)
    cols["ratio_phi"] = cols["phi_piece"] / cols["nbhd"]
    cols["ratio_lp"] = cols["lp_piece"] / cols["nbhd_prev"]
    rep = DyadicReport(f"packet_p{p:g}", ks, cols)
    for c in ("phi_piece", "lp_piece"):
        rep.fit_slope(c)
    rep.meta = {"p": float(p), "constant_phi": float(cols["ratio_phi"].max()),
                "constant_lp": float(cols["ratio_lp"].max()),
                "ratio_spread_phi": float(cols["ratio_phi"].max() / cols["ratio_phi"].min()),
                "ratio_spread_lp": float(cols["ratio_lp"].max() / cols["ratio_lp"].min())}
    return rep


def smooth_test_family(spec: GridSpec) -> list[tuple[str, ScalarField]]:
    """Eighteen smooth fields centered in the box.

    Six Gaussians (widths ``L/64 .. L/8`` in steps of ``2^0.6``), six
    Gaussians of width ``L/16`` modulated at carriers ``4 * 2^j / L`` for
    ``j = 0..5``, and six raised-cosine bumps of radius ``L/32 .. L/4`` in
    steps of ``2^0.6``.  Widths stay at or below ``L/8``: on the periodic box
    the zero-frequency cell carries the member's mean, which neither
    projection sees, so wider members measure the box rather than the
    inequality.
    """
    if spec.dim != 2:
        raise LPError("the smooth test family is planar")
    L = spec.box_length
    x = np.arange(spec.n) * spec.h - L / 2
    X, Y = np.meshgrid(x, x, indexing="xy")
    R2 = X * X + Y * Y
    out = []
    for j in range(6):
        w = L / 64 * 2.0 ** (0.6 * j)
        out.append((f"gauss_w{w:g}", ScalarField(spec, np.exp(-R2 / (2 * w * w)))))
    w = L / 16
    for j in range(6):
        a = 4.0 / L * 2.0 ** j
        out.append((f"modgauss_a{a:g}", ScalarField(spec, np.exp(-R2 / (2 * w * w)) * np.cos(2 * np.pi * a * X))))
    for j in range(6):
        rad = L / 32 * 2.0 ** (0.6 * j)
        rr = np.sqrt(R2) / rad
        out.append((f"cosbump_r{rad:.4g}", ScalarField(spec, np.where(rr < 1, 0.5 * (1 + np.cos(np.pi * rr)), 0.0))))
    return out


def verify_lp_inequality(family, phi: PhiFunction, s: float, q: float, r: float) -> dict:
    """Two-sided Lorentz-Sobolev check over a family of fields.

    For each member, ``lhs = ||f_s||_{q,r}`` and ``rhs = ||P_{<=0} f||_{q,r} +
    ||S f||_{q,r}``.  Reports ``rhs / lhs`` per member with its min, max and
    spread.  ``family`` is a list of ``(name, field)`` pairs.
    """
    return verify_lp_inequalities(family, phi, s, [(q, r)])[0]


def verify_lp_inequalities(family, phi: PhiFunction, s: float, pairs) -> list[dict]:
    """:func:`verify_lp_inequality` for several ``(q, r)`` pairs at one ``s``.

    The lift, low part and square function are computed once per member.
    """
    rows = {tuple(qr): [] for qr in pairs}
    for name, f in family:
        hs = half_spectrum(f)
        lift = bessel_lift(hs, s)
        low_f = project_low(hs, phi, s)
        sq_f = streamed_square_function(hs, phi, s)
        for q, r in rows:
            lhs = lorentz_quasinorm(lift, q, r)
            low = lorentz_quasinorm(low_f, q, r)
            sq = lorentz_quasinorm(sq_f, q, r)
            rhs = low + sq
            ratio = rhs / lhs if lhs > 0 else (0.0 if rhs == 0 else math.inf)
            rows[(q, r)].append({"name": name, "lhs": lhs, "low": low, "square": sq, "rhs": rhs, "ratio": ratio})
    out = []
    for (q, r), members in rows.items():
        ratios = np.array([row["ratio"] for row in members if row["lhs"] > 0])
        summary = {"s": float(s), "q": float(q), "r": float(r) if math.isfinite(r) else "inf", "members": members}
        if ratios.size:
            summary.update(min=float(ratios.min()), max=float(ratios.max()),
                           spread=float(ratios.max() / ratios.min()),
                           finite_positive=bool(np.all(np.isfinite(ratios)) and np.all(ratios > 0)))
        out.append(summary)
    return out
