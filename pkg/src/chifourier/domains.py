"""Bounded planar test domains and their rasterized indicators.

Every shape answers vectorized point queries and produces a boolean mask
for a block of sample rows; :func:`rasterize` turns those masks into a
binary (majority of ``s x s`` subsamples) or coverage indicator.
Cell ``j`` is centered on the lattice point ``x_j = j h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import ConfigurationError, GridSpec, ScalarField

__all__ = [
    "DomainError",
    "Disk",
    "AxisRect",
    "Polygon",
    "PolygonUnion",
    "LipschitzGraph",
    "KochSnowflake",
    "RasterOptions",
    "koch_polygon",
    "point_inside",
    "rasterize",
    "shape_from_dict",
]

_ROW_BLOCK = 64


class DomainError(ConfigurationError):
    """Shape construction or placement error."""


class _Shape:
    def contains(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)`` of the closure."""
        raise NotImplementedError

    def mask(self, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Boolean ``(len(ys), len(xs))`` membership of the sample lattice."""
        return self.contains(xs[None, :], ys[:, None])

    def area(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(_Shape):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains(self, x, y):
        cx, cy = self.center
        return (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2 < self.radius**2

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)

    def area(self):
        return math.pi * self.radius**2

    def perimeter(self):
        return 2 * math.pi * self.radius

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class AxisRect(_Shape):
    corner: tuple[float, float]
    widths: tuple[float, float]

    def __post_init__(self):
        if min(self.widths) <= 0:
            raise DomainError("rectangle widths must be positive")
        object.__setattr__(self, "corner", tuple(float(c) for c in self.corner))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    def contains(self, x, y):
        (x0, y0), (w, v) = self.corner, self.widths
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= x0) & (x < x0 + w) & (y >= y0) & (y < y0 + v)

    def mask(self, ys, xs):
        (x0, y0), (w, v) = self.corner, self.widths
        inx = (xs >= x0) & (xs < x0 + w)
        iny = (ys >= y0) & (ys < y0 + v)
        return iny[:, None] & inx[None, :]

    def bounds(self):
        (x0, y0), (w, v) = self.corner, self.widths
        return (x0, y0, x0 + w, y0 + v)

    def area(self):
        return self.widths[0] * self.widths[1]

    def perimeter(self):
        return 2 * (self.widths[0] + self.widths[1])

    def to_dict(self):
        return {"type": "rect", "corner": list(self.corner), "widths": list(self.widths)}


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


@dataclass(frozen=True, eq=False)
class Polygon(_Shape):
    """Simple polygon given by its vertex loop (not repeated at the end)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise DomainError("polygon needs at least 3 vertices of shape (k, 2)")
        if np.allclose(v[0], v[-1]) and v.shape[0] > 3:
            v = v[:-1]
        if abs(_signed_area(v)) == 0:
            raise DomainError("degenerate polygon (zero area)")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    @property
    def n_edges(self) -> int:
        return self.vertices.shape[0]

    def edges(self):
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        return a, b

    def perimeter(self) -> float:
        a, b = self.edges()
        return float(np.hypot(*(b - a).T).sum())

    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    def bounds(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    def is_simple(self, max_edges: int = 4096) -> bool:
        """Brute-force check that no two non-adjacent edges cross."""
        k = self.n_edges
        if k > max_edges:
            raise ValueError("polygon too large for the brute-force simplicity check")
        a, b = self.edges()
        for i in range(k):
            for j in range(i + 2, k):
                if i == 0 and j == k - 1:
                    continue
                if _segments_intersect(a[i], b[i], a[j], b[j]):
                    return False
        return True

    def contains(self, x, y):
        """Even-odd crossing test; equals the winding rule for simple polygons."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x, y = np.broadcast_arrays(x, y)
        inside = np.zeros(x.shape, dtype=bool)
        a, b = self.edges()
        for (x0, y0), (x1, y1) in zip(a, b):
            if y0 == y1:
                continue
            cond = (y0 <= y) != (y1 <= y)
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            inside ^= cond & (x > xc)
        return inside

    def mask(self, ys, xs):
        return _scanline_mask([self], ys, xs)

    def to_csv(self, path) -> None:
        rows = ["x,y"] + [f"{x!r},{y!r}" for x, y in self.vertices.tolist()]
        Path(path).write_text("\n".join(rows) + "\n")

    def to_dict(self):
        return {"type": "polygon", "vertices": self.vertices.tolist()}


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _scanline_mask(polygons, ys, xs) -> np.ndarray:
    """Even-odd fill of the sample lattice ``ys x xs`` (``xs`` ascending).

    Each edge crossing of a sample row toggles every sample to its right;
    toggles are accumulated with a cumulative sum along the row.
    """
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    out = np.zeros((ys.size, xs.size), dtype=bool)
    for poly in polygons:
        a, b = poly.edges()
        ymin = np.minimum(a[:, 1], b[:, 1])
        ymax = np.maximum(a[:, 1], b[:, 1])
        live = (ymax > ys.min()) & (ymin <= ys.max()) & (ymax > ymin)
        a, b, ymin, ymax = a[live], b[live], ymin[live], ymax[live]
        if a.shape[0] == 0:
            continue
        # rows hit by each edge; ys is ascending within a block
        lo = np.searchsorted(ys, ymin, side="left")
        hi = np.searchsorted(ys, ymax, side="left")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        edge_idx = np.repeat(np.arange(a.shape[0]), counts)
        first = np.cumsum(counts) - counts
        rows = np.arange(total) - np.repeat(first, counts) + np.repeat(lo, counts)
        y = ys[rows]
        x0, y0 = a[edge_idx, 0], a[edge_idx, 1]
        x1, y1 = b[edge_idx, 0], b[edge_idx, 1]
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        cols = np.searchsorted(xs, xc, side="right")
        width = xs.size + 1
        toggles = np.bincount(rows * width + cols, minlength=ys.size * width)
        toggles = toggles.reshape(ys.size, width)[:, :-1].astype(np.int32)
        parity = (np.cumsum(toggles, axis=1) & 1).astype(bool)
        out ^= parity
    return out


@dataclass(frozen=True, eq=False)
class PolygonUnion(_Shape):
    polygons: tuple

    def __post_init__(self):
        polys = tuple(p if isinstance(p, Polygon) else Polygon(p) for p in self.polygons)
        if not polys:
            raise DomainError("empty polygon union")
        object.__setattr__(self, "polygons", polys)

    @property
    def n_edges(self) -> int:
        return sum(p.n_edges for p in self.polygons)

    def contains(self, x, y):
        out = self.polygons[0].contains(x, y)
        for p in self.polygons[1:]:
            out = out | p.contains(x, y)
        return out

    def mask(self, ys, xs):
        out = self.polygons[0].mask(ys, xs)
        for p in self.polygons[1:]:
            out |= p.mask(ys, xs)
        return out

    def bounds(self):
        b = np.array([p.bounds() for p in self.polygons])
        return (b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max())

    def perimeter(self) -> float:
        return sum(p.perimeter() for p in self.polygons)

    def area(self) -> float:
        # exact only for disjoint members
        return sum(p.area() for p in self.polygons)

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack([p.vertices for p in self.polygons])

    def to_csv(self, path) -> None:
        rows = ["polygon,x,y"]
        for i, p in enumerate(self.polygons):
            rows += [f"{i},{x!r},{y!r}" for x, y in p.vertices.tolist()]
        Path(path).write_text("\n".join(rows) + "\n")

    def to_dict(self):
        return {"type": "polygons", "polygons": [p.vertices.tolist() for p in self.polygons]}


MAX_KOCH_DEPTH = 10


def koch_polygon(center, circumradius: float, n_iter: int) -> PolygonUnion:
    """Koch snowflake by edge replacement on a counter-clockwise triangle.

    Each segment is split in thirds and the middle third is replaced by the
    two outer sides of an equilateral bump, giving ``3 * 4**n_iter`` edges.
    """
    if n_iter < 0:
        raise DomainError("snowflake depth must be >= 0")
    if n_iter > MAX_KOCH_DEPTH:
        raise DomainError(f"snowflake depth {n_iter} > {MAX_KOCH_DEPTH} (edge count explosion)")
    c = complex(*center)
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    pts = c + circumradius * np.exp(1j * angles)
    rot = np.exp(-1j * np.pi / 3)  # outward for a counter-clockwise loop
    for _ in range(n_iter):
        p = pts
        q = np.roll(pts, -1)
        d = (q - p) / 3.0
        a = p + d
        b = p + 2 * d
        tip = a + d * rot
        pts = np.column_stack([p, a, tip, b]).ravel()
    return PolygonUnion((Polygon(np.column_stack([pts.real, pts.imag])),))


@dataclass(frozen=True, eq=False)
class KochSnowflake(_Shape):
    center: tuple[float, float]
    circumradius: float
    n_iter: int = 6
    _poly: PolygonUnion = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "_poly", koch_polygon(self.center, self.circumradius, self.n_iter))

    @property
    def polygon(self) -> PolygonUnion:
        return self._poly

    def contains(self, x, y):
        return self._poly.contains(x, y)

    def mask(self, ys, xs):
        return self._poly.mask(ys, xs)

    def bounds(self):
        return self._poly.bounds()

    def area(self) -> float:
        return self._poly.area()

    def perimeter(self) -> float:
        return self._poly.perimeter()

    @property
    def side(self) -> float:
        return self.circumradius * math.sqrt(3.0)

    def to_dict(self):
        return {"type": "koch", "center": list(self.center), "circumradius": self.circumradius,
                "n_iter": self.n_iter}


@dataclass(frozen=True, eq=False)
class LipschitzGraph(_Shape):
    """Rectangle whose top side is a seeded piecewise-linear random walk.

    Slopes are drawn uniformly from ``[-K, K]``; the walk is reflected so the
    top stays within ``amplitude`` of the nominal height.
    """

    corner: tuple[float, float]
    widths: tuple[float, float]
    lipschitz: float = 1.0
    segments: int = 64
    amplitude: float = 0.05
    seed: int = 0
    _poly: PolygonUnion = field(init=False, repr=False)

    def __post_init__(self):
        if self.lipschitz <= 0 or self.segments < 1:
            raise DomainError("Lipschitz constant and segment count must be positive")
        (x0, y0), (w, v) = self.corner, self.widths
        if self.amplitude >= v:
            raise DomainError("profile amplitude must be below the rectangle height")
        rng = np.random.default_rng(self.seed)
        dx = w / self.segments
        heights = [y0 + v]
        for _ in range(self.segments):
            slope = rng.uniform(-self.lipschitz, self.lipschitz)
            nxt = heights[-1] + slope * dx
            if abs(nxt - (y0 + v)) > self.amplitude:
                nxt = heights[-1] - slope * dx
            heights.append(nxt)
        xs = x0 + dx * np.arange(self.segments + 1)
        top = np.column_stack([xs, heights])[::-1]
        verts = np.vstack([[x0, y0], [x0 + w, y0], top])
        object.__setattr__(self, "_poly", PolygonUnion((Polygon(verts),)))

    @property
    def polygon(self) -> PolygonUnion:
        return self._poly

    def contains(self, x, y):
        return self._poly.contains(x, y)

    def mask(self, ys, xs):
        return self._poly.mask(ys, xs)

    def bounds(self):
        return self._poly.bounds()

    def area(self):
        return self._poly.area()

    def perimeter(self):
        return self._poly.perimeter()

    def profile_slopes(self) -> np.ndarray:
        top = self._poly.polygons[0].vertices[2:][::-1]
        return np.diff(top[:, 1]) / np.diff(top[:, 0])

    def to_dict(self):
        return {"type": "lipschitz", "corner": list(self.corner), "widths": list(self.widths),
                "lipschitz": self.lipschitz, "segments": self.segments,
                "amplitude": self.amplitude, "seed": self.seed}


def shape_from_dict(d: dict) -> _Shape:
    kind = d.get("type")
    if kind == "disk":
        return Disk(tuple(d["center"]), float(d["radius"]))
    if kind == "rect":
        return AxisRect(tuple(d["corner"]), tuple(d["widths"]))
    if kind == "koch":
        return KochSnowflake(tuple(d["center"]), float(d["circumradius"]), int(d.get("n_iter", 6)))
    if kind == "lipschitz":
        return LipschitzGraph(tuple(d["corner"]), tuple(d["widths"]), float(d.get("lipschitz", 1.0)),
                              int(d.get("segments", 64)), float(d.get("amplitude", 0.05)),
                              int(d.get("seed", 0)))
    if kind == "polygon":
        return PolygonUnion((Polygon(d["vertices"]),))
    if kind == "polygons":
        return PolygonUnion(tuple(Polygon(v) for v in d["polygons"]))
    raise ConfigurationError(f"unknown shape type {kind!r}")


def point_inside(shape: _Shape, x) -> bool:
    x = np.asarray(x, dtype=np.float64)
    return bool(shape.contains(x[..., 0], x[..., 1]))


@dataclass(frozen=True)
class RasterOptions:
    mode: str = "binary"
    subsamples: int = 5

    def __post_init__(self):
        if self.mode not in ("binary", "coverage"):
            raise ConfigurationError(f"raster mode must be 'binary' or 'coverage', got {self.mode!r}")
        if self.subsamples < 1 or self.subsamples % 2 == 0:
            raise ConfigurationError("subsample count must be a positive odd integer")


def check_margin(shape: _Shape, spec: GridSpec) -> None:
    L = spec.box_length
    lo, hi = L / 8, 7 * L / 8
    tol = 1e-12 * L
    xmin, ymin, xmax, ymax = shape.bounds()
    bad = [f"{name}={val:.6g}" for name, val in (("xmin", xmin), ("ymin", ymin)) if val < lo - tol]
    bad += [f"{name}={val:.6g}" for name, val in (("xmax", xmax), ("ymax", ymax)) if val > hi + tol]
    if bad:
        raise DomainError(f"shape violates the L/8 margin [{lo:.6g}, {hi:.6g}]: " + ", ".join(bad))


def rasterize(shape: _Shape, spec: GridSpec, opts: RasterOptions | None = None) -> ScalarField:
    """Indicator of ``shape`` on ``spec``; ``values[i, j]`` samples the point ``(j h, i h)``."""
    opts = opts or RasterOptions()
    if spec.dim != 2:
        raise ConfigurationError("rasterize supports dim=2 only")
    check_margin(shape, spec)
    n, h, s = spec.n, spec.h, opts.subsamples
    offsets = ((np.arange(s) + 0.5) / s - 0.5) * h
    centers = np.arange(n) * h
    sub = (centers[:, None] + offsets[None, :]).ravel()  # ascending
    counts = np.zeros((n, n), dtype=np.int32)
    xmin, ymin, xmax, ymax = shape.bounds()
    row_lo = max(0, int(math.floor(ymin / h)) - 1)
    row_hi = min(n, int(math.ceil(ymax / h)) + 2)
    for r0 in range(row_lo, row_hi, _ROW_BLOCK):
        r1 = min(row_hi, r0 + _ROW_BLOCK)
        ys = sub[r0 * s:r1 * s]
        m = shape.mask(ys, sub)
        counts[r0:r1] = m.reshape(r1 - r0, s, n, s).sum(axis=(1, 3))
    if opts.mode == "binary":
        values = (2 * counts > s * s).astype(np.float64)
    else:
        values = counts / float(s * s)
    return ScalarField._wrap(spec, values)
