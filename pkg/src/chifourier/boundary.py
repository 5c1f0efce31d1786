"""Boundary neighbourhoods |(dE)_delta|, Minkowski-type exponent fits and dyadic
boundary integrals.

The discrete boundary is the set of interfaces between cells of opposite
phase.  A cell whose center lies at distance ``D`` from the nearest
opposite-phase center sits somewhere in ``[D - h/2, D]`` from that interface,
and :func:`neighborhood_volume` counts each cell by the fraction of this
bracket lying below ``delta``.  Counting whole cells with ``D < delta`` instead
undercounts thin bands by over 10% at ``delta = 4h``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

from .fields import GridSpec, ScalarField

__all__ = [
    "BoundaryError",
    "DistanceMap",
    "BoundaryProfile",
    "DyadicIntegral",
    "distance_transform",
    "brute_force_distance",
    "neighborhood_volume",
    "boundary_profile",
    "fit_gamma",
    "sickel_integral",
    "fchar_integral",
    "lsq_integrals",
    "box_counting_dimension",
]

# dyadic blocks must shrink by at least this log2 factor per scale to count as convergent
DIVERGENCE_SLOPE = -0.05


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DistanceMap:
    """Per-cell Euclidean distance (box units) to the nearest opposite-phase cell center."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values.flags.writeable = False

    @functools.cached_property
    def sorted_values(self) -> np.ndarray:
        out = np.sort(self.values, axis=None)
        out.flags.writeable = False
        return out


def distance_transform(indicator: ScalarField) -> DistanceMap:
    """Exact two-phase Euclidean distance transform of a {0,1} raster."""
    v = indicator.values
    if not np.all((v == 0) | (v == 1)):
        raise BoundaryError("indicator values must be 0 or 1")
    inside = v.astype(bool)
    if inside.all() or not inside.any():
        raise BoundaryError("no boundary: indicator is constant")
    h = indicator.spec.h
    # distance_transform_edt measures to the nearest zero element
    d_in = ndimage.distance_transform_edt(inside, sampling=h)
    d_out = ndimage.distance_transform_edt(~inside, sampling=h)
    return DistanceMap(indicator.spec, np.where(inside, d_in, d_out))


def brute_force_distance(indicator: ScalarField) -> np.ndarray:
    """O(n^4) reference: nearest opposite-phase cell center for every cell."""
    v = indicator.values.astype(bool)
    idx = np.indices(v.shape).reshape(v.ndim, -1).T.astype(np.float64)
    flat = v.ravel()
    out = np.empty(flat.size)
    for phase in (True, False):
        src = idx[flat == phase]
        dst = idx[flat != phase]
        if dst.size == 0:
            raise BoundaryError("no boundary: indicator is constant")
        d2 = ((src[:, None, :] - dst[None, :, :]) ** 2).sum(-1).min(axis=1)
        out[flat == phase] = np.sqrt(d2)
    return out.reshape(v.shape) * indicator.spec.h


def neighborhood_volume(dmap: DistanceMap, delta: float) -> float:
    """Measure of ``{x : dist(x, dE) < delta}`` on the raster.

    Valid for ``2h <= delta <= L``; above ``L/8`` the band may reach the box
    edge and the value saturates at the box volume.
    """
    spec = dmap.spec
    if not (2 * spec.h * (1 - 1e-12) <= delta <= spec.box_length):
        raise BoundaryError(f"delta={delta:g} outside [2h, L] = [{2 * spec.h:g}, {spec.box_length:g}]")
    return float(_band_volumes(dmap.sorted_values, np.array([delta]), spec)[0])


def _band_volumes(d_sorted: np.ndarray, deltas: np.ndarray, spec: GridSpec) -> np.ndarray:
    # full weight for D <= delta, linear ramp down to zero at D = delta + h/2
    half = 0.5 * spec.h
    csum = np.concatenate([[0.0], np.cumsum(d_sorted)])
    full = np.searchsorted(d_sorted, deltas, side="right")
    edge = np.searchsorted(d_sorted, deltas + half, side="left")
    partial = ((edge - full) * (deltas + half) - (csum[edge] - csum[full])) / half
    return (full + partial) * spec.cell_measure


@dataclass
class BoundaryProfile:
    """``|(dE)_delta|`` at ``delta_i = 2^-i L`` plus an optional exponent fit."""

    dim: int
    box_length: float
    i_values: np.ndarray
    deltas: np.ndarray
    volumes: np.ndarray
    gamma: float | None = None
    stderr: float | None = None
    window: tuple[int, int] | None = None
    constant: float | None = None
    grid_h: float | None = None
    meta: dict = field(default_factory=dict)

    def volume_at(self, i: int) -> float:
        return float(self.volumes[list(self.i_values).index(i)])

    def to_csv(self, path) -> None:
        rows = ["delta,volume,log2_delta,log2_volume"]
        for d, v in zip(self.deltas.tolist(), self.volumes.tolist()):
            rows.append(f"{d!r},{v!r},{math.log2(d)!r},{math.log2(v) if v > 0 else float('-inf')!r}")
        Path(path).write_text("\n".join(rows) + "\n")

    def fit_summary(self) -> dict:
        return {"gamma": self.gamma, "stderr": self.stderr,
                "window": list(self.window) if self.window else None, "constant": self.constant}


def boundary_profile(dmap: DistanceMap, i_min: int = 0, i_max: int | None = None) -> BoundaryProfile:
    """Neighbourhood volumes on the dyadic grid; ``i_max`` defaults to ``log2(n) - 1`` (delta = 2h)."""
    spec = dmap.spec
    if i_max is None:
        i_max = int(round(math.log2(spec.n))) - 1
    i_values = np.arange(i_min, i_max + 1)
    deltas = spec.box_length * 2.0 ** (-i_values.astype(np.float64))
    volumes = _band_volumes(dmap.sorted_values, deltas, spec)
    return BoundaryProfile(spec.dim, spec.box_length, i_values, deltas, volumes,
                           grid_h=spec.h)


def fit_gamma(profile: BoundaryProfile, window: tuple[int, int] | None = None) -> tuple[float, float]:
    """OLS slope ``m`` of log2 volume against log2 delta over ``i in [window]``; returns ``(dim - m, stderr)``.

    The profile is updated in place with the fit, its window and the smallest
    constant ``C`` such that ``volume <= C delta^(dim - gamma)`` on the window.
    """
    if window is None:
        n_top = int(round(math.log2(profile.box_length / profile.grid_h))) if profile.grid_h else None
        window = (3, (n_top - 1) if n_top else int(profile.i_values.max()))
    lo, hi = window
    sel = (profile.i_values >= lo) & (profile.i_values <= hi)
    if np.count_nonzero(sel) < 4:
        raise BoundaryError(f"fit window {window} holds fewer than 4 profile points")
    x = np.log2(profile.deltas[sel])
    y = np.log2(profile.volumes[sel])
    res = stats.linregress(x, y)
    gamma = profile.dim - res.slope
    profile.gamma = float(gamma)
    profile.stderr = float(res.stderr)
    profile.window = (int(lo), int(hi))
    profile.constant = float(np.max(profile.volumes[sel] / profile.deltas[sel] ** res.slope))
    return float(gamma), float(res.stderr)


@dataclass
class DyadicIntegral:
    """Dyadic quadrature of ``int f(delta) d delta / delta`` with per-block terms."""

    value: float
    deltas: np.ndarray
    terms: np.ndarray
    divergent_trend: bool
    trend_slope: float

    def to_dict(self) -> dict:
        return {"value": self.value, "divergent_trend": self.divergent_trend,
                "trend_slope": self.trend_slope,
                "blocks": [{"delta": d, "term": t} for d, t in zip(self.deltas.tolist(), self.terms.tolist())]}


def _dyadic_terms(profile: BoundaryProfile, delta_min: float, integrand) -> tuple[np.ndarray, np.ndarray]:
    if profile.grid_h is not None and delta_min < 2 * profile.grid_h * (1 - 1e-12):
        raise BoundaryError("delta_min must be at least 2h")
    sel = (profile.deltas >= delta_min * (1 - 1e-12)) & (profile.deltas <= 1.0 * (1 + 1e-12))
    deltas = profile.deltas[sel]
    vols = profile.volumes[sel]
    return deltas, integrand(deltas, vols) * math.log(2.0)


def _trend(deltas: np.ndarray, terms: np.ndarray, box_length: float) -> float:
    """log2 growth rate of the dyadic terms per halving of delta, on delta <= L/8."""
    sel = (deltas <= box_length / 8 * (1 + 1e-12)) & (terms > 0)
    if np.count_nonzero(sel) < 3:
        sel = terms > 0
    if np.count_nonzero(sel) < 2:
        return float("nan")
    return float(np.polyfit(-np.log2(deltas[sel]), np.log2(terms[sel]), 1)[0])


def _integral(profile, delta_min, integrand, power) -> DyadicIntegral:
    deltas, terms = _dyadic_terms(profile, delta_min, integrand)
    slope = _trend(deltas, terms, profile.box_length)
    value = float(terms.sum()) ** (1.0 / power)
    return DyadicIntegral(value, deltas, terms, bool(slope >= DIVERGENCE_SLOPE), slope)


def sickel_integral(profile: BoundaryProfile, q: float, s: float, delta_min: float) -> DyadicIntegral:
    """``int_{delta_min}^1 delta^(-qs) |(dE)_delta| d delta / delta`` (not rooted)."""
    if q < 1 or not 0 < s < 1:
        raise ValueError("need q >= 1 and 0 < s < 1")
    return _integral(profile, delta_min, lambda d, v: d ** (-q * s) * v, 1.0)


def fchar_integral(profile: BoundaryProfile, p: float, delta_min: float) -> DyadicIntegral:
    """``(int delta^(-d(1-p/2)) |(dE)_delta|^(p/2) d delta / delta)^(1/p)``."""
    if not 1 <= p <= 2:
        raise ValueError("need 1 <= p <= 2")
    d = profile.dim
    return _integral(profile, delta_min, lambda dl, v: dl ** (-d * (1 - p / 2)) * v ** (p / 2), p)


def lsq_integrals(profile: BoundaryProfile, q: float, s: float,
                  delta_min: float) -> tuple[DyadicIntegral, DyadicIntegral]:
    """The two Bessel-potential bounds: ``q >= 2`` form (square root) and ``q <= 2`` form (q-th root)."""
    high = _integral(profile, delta_min, lambda d, v: d ** (-2 * s) * v ** (2.0 / q), 2.0)
    low = _integral(profile, delta_min, lambda d, v: d ** (-q * s) * v, q)
    return high, low


def box_counting_dimension(vertices: np.ndarray, box_sizes, closed: bool = True,
                           samples_per_box: int = 4) -> tuple[float, np.ndarray]:
    """Box-counting slope of a polyline, sampled densely along its edges.

    Returns the fitted dimension and the box counts for ``box_sizes``.
    """
    v = np.asarray(vertices, dtype=np.float64)
    if closed:
        v = np.vstack([v, v[:1]])
    seg = np.diff(v, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    counts = []
    for eps in box_sizes:
        k = np.maximum(1, np.ceil(lengths / eps * samples_per_box).astype(int))
        t = np.concatenate([np.arange(m) / m for m in k])
        idx = np.repeat(np.arange(seg.shape[0]), k)
        pts = v[idx] + seg[idx] * t[:, None]
        cells = np.floor(pts / eps).astype(np.int64)
        counts.append(np.unique(cells, axis=0).shape[0])
    counts = np.asarray(counts, dtype=np.float64)
    slope = np.polyfit(-np.log2(np.asarray(box_sizes, dtype=np.float64)), np.log2(counts), 1)[0]
    return float(slope), counts
