"""Grid containers, FFT quadrature, L^p norms and Lorentz quasinorms.

Physical samples live at ``x_j = j * h`` on the periodic box ``[0, L)^dim``.
Spectra are stored with frequency 0 centered, at ``xi_m = m / L`` for
``m in [-n/2, n/2)^dim``, and approximate the continuous transform
``int f(x) exp(-2 pi i x . xi) dx``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

__all__ = [
    "ConfigurationError",
    "GridSpec",
    "ScalarField",
    "Spectrum",
    "DistributionFunction",
    "Annulus",
    "forward_transform",
    "inverse_transform",
    "lp_norm",
    "distribution",
    "lorentz_quasinorm",
    "lorentz_from_magnitudes",
    "frequency_axis",
    "position_axis",
    "frequency_radius",
    "position_radius",
    "save_field",
    "load_field",
    "set_fft_workers",
]

MAGIC = b"CFL1"
_HEADER = struct.Struct("<4sHHd")

_FFT_WORKERS = 1


class ConfigurationError(ValueError):
    """Invalid grid, shape or scenario parameters."""


def set_fft_workers(workers: int) -> None:
    """Number of threads handed to ``scipy.fft`` for every transform."""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(workers))


def fft_workers() -> int:
    return _FFT_WORKERS


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` samples per axis on a box of side ``box_length``."""

    dim: int = 2
    n: int = 1024
    box_length: float = 1.0

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or not 1 <= self.dim <= 3:
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 16:
            raise ConfigurationError(f"n must be a power of two >= 16, got {self.n!r}")
        if not (self.box_length > 0 and math.isfinite(self.box_length)):
            raise ConfigurationError(f"box_length must be positive, got {self.box_length!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_measure(self) -> float:
        """Physical-side quadrature weight ``h^dim``."""
        return self.h**self.dim

    @property
    def frequency_cell_measure(self) -> float:
        """Frequency-side quadrature weight ``L^-dim``."""
        return self.box_length ** (-self.dim)

    @property
    def box_volume(self) -> float:
        return self.box_length**self.dim

    @property
    def nyquist(self) -> float:
        return self.n / (2.0 * self.box_length)

    @property
    def half_nyquist(self) -> float:
        return self.n / (4.0 * self.box_length)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.dim, self.n * factor, self.box_length)


def _frozen(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples ``values[j] = f(j * h)`` on a :class:`GridSpec`."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != self.spec.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def _wrap(cls, spec: GridSpec, values: np.ndarray) -> "ScalarField":
        # Trusted constructor: skips the copy and the finiteness scan.
        obj = object.__new__(cls)
        object.__setattr__(obj, "spec", spec)
        object.__setattr__(obj, "values", _frozen(np.ascontiguousarray(values, dtype=np.float64)))
        return obj

    @property
    def cell_measure(self) -> float:
        return self.spec.cell_measure

    def integral(self) -> float:
        return float(self.values.sum() * self.spec.cell_measure)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Centered frequency samples approximating the continuous Fourier transform."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128, copy=True)
        if values.shape != self.spec.shape:
            raise ValueError(f"spectrum shape {values.shape} does not match grid {self.spec.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def _wrap(cls, spec: GridSpec, values: np.ndarray) -> "Spectrum":
        obj = object.__new__(cls)
        object.__setattr__(obj, "spec", spec)
        object.__setattr__(obj, "values", _frozen(np.ascontiguousarray(values, dtype=np.complex128)))
        return obj

    @property
    def cell_measure(self) -> float:
        return self.spec.frequency_cell_measure

    def at(self, m) -> complex:
        """Value at the integer frequency index ``m`` (``xi = m / L``)."""
        idx = tuple(int(mi) + self.spec.n // 2 for mi in np.atleast_1d(m))
        return complex(self.values[idx])


@dataclass(frozen=True)
class Annulus:
    """Region ``inner <= |.| < outer`` (``outer`` may be ``inf``)."""

    inner: float = 0.0
    outer: float = math.inf


def frequency_axis(spec: GridSpec) -> np.ndarray:
    return np.arange(-spec.n // 2, spec.n // 2) / spec.box_length


def position_axis(spec: GridSpec) -> np.ndarray:
    """Minimum-image coordinates in ``[-L/2, L/2)`` aligned with the centered layout."""
    return np.arange(-spec.n // 2, spec.n // 2) * spec.h


def _radius(axis: np.ndarray, dim: int) -> np.ndarray:
    sq = axis**2
    r2 = sq
    for d in range(1, dim):
        r2 = np.add.outer(r2, sq)
    return np.sqrt(r2)


def frequency_radius(spec: GridSpec) -> np.ndarray:
    """``|xi|`` on the centered frequency lattice."""
    return _radius(frequency_axis(spec), spec.dim)


def position_radius(spec: GridSpec) -> np.ndarray:
    """Periodic distance from the origin, laid out to match ``ScalarField.values``."""
    r = _radius(position_axis(spec), spec.dim)
    return np.fft.ifftshift(r)


def forward_transform(f: ScalarField) -> Spectrum:
    """``h^dim * DFT(f)`` with frequency 0 moved to the center."""
    spec = f.spec
    if not _is_power_of_two(spec.n):
        raise ConfigurationError("n must be a power of two")
    out = scipy.fft.fftn(f.values, workers=_FFT_WORKERS)
    out *= spec.cell_measure
    return Spectrum._wrap(spec, scipy.fft.fftshift(out))


def inverse_transform(S: Spectrum) -> ScalarField:
    """Left inverse of :func:`forward_transform`; the real part is returned."""
    spec = S.spec
    if S.values.shape != spec.shape:
        raise ValueError("spectrum shape does not match its grid")
    out = scipy.fft.ifftn(scipy.fft.ifftshift(S.values), workers=_FFT_WORKERS)
    return ScalarField._wrap(spec, out.real / spec.cell_measure)


def _region_mask(obj, region: Annulus | None):
    if region is None:
        return None
    if isinstance(obj, Spectrum):
        r = frequency_radius(obj.spec)
    else:
        r = position_radius(obj.spec)
    return (r >= region.inner) & (r < region.outer)


def _magnitudes(obj, region: Annulus | None = None) -> np.ndarray:
    mag = np.abs(obj.values)
    mask = _region_mask(obj, region)
    if mask is not None:
        mag = mag[mask]
    return mag.ravel()


def lp_norm(obj: ScalarField | Spectrum, p: float, region: Annulus | None = None) -> float:
    """Quadrature ``(sum mu |v|^p)^(1/p)`` over ``region``; ``p = inf`` gives the max."""
    if not p >= 1:
        raise ValueError(f"lp_norm requires p >= 1, got {p}; use lorentz_quasinorm for p < 1")
    mag = _magnitudes(obj, region)
    if mag.size == 0:
        return 0.0
    if math.isinf(p):
        return float(mag.max())
    mu = obj.cell_measure
    if p == 1:
        return float(mu * mag.sum())
    if p == 2:
        return float(math.sqrt(mu * np.dot(mag, mag)))
    peak = mag.max()
    if peak == 0:
        return 0.0
    # Scale by the peak so tiny spectral tails do not underflow.
    return float(peak * (mu * np.sum((mag / peak) ** p)) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    """Empirical distribution ``lambda -> mu * #{|v| > lambda}``."""

    magnitudes: np.ndarray  # ascending
    cell_measure: float

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", _frozen(np.asarray(self.magnitudes, dtype=np.float64)))

    @property
    def total_measure(self) -> float:
        return self.cell_measure * self.magnitudes.size

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=np.float64)
        above = self.magnitudes.size - np.searchsorted(self.magnitudes, lam, side="right")
        out = self.cell_measure * above
        return float(out) if out.ndim == 0 else out

    def levels(self) -> np.ndarray:
        """Distinct sample magnitudes (the lambda grid)."""
        return np.unique(self.magnitudes)

    def to_csv(self, path) -> None:
        lam = self.levels()
        meas = self(lam)
        # Include lambda = 0- so the total measure is recorded.
        rows = ["lambda,measure", f"0,{self.total_measure!r}"]
        rows += [f"{a!r},{b!r}" for a, b in zip(lam.tolist(), np.atleast_1d(meas).tolist())]
        Path(path).write_text("\n".join(rows) + "\n")


def distribution(obj: ScalarField | Spectrum, region: Annulus | None = None) -> DistributionFunction:
    mag = np.sort(_magnitudes(obj, region))
    return DistributionFunction(mag, obj.cell_measure)


def lorentz_from_magnitudes(mag: np.ndarray, cell_measure: float, q: float, r: float = math.inf,
                            presorted: bool = False) -> float:
    """Lorentz quasinorm of a piecewise-constant rearrangement.

    ``mag`` holds sample magnitudes, each carrying measure ``cell_measure``.
    The decreasing rearrangement is ``f*(t) = v_i`` on ``[mu (i-1), mu i)``.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    mag = np.asarray(mag, dtype=np.float64).ravel()
    if mag.size == 0:
        return 0.0
    v = mag if presorted else np.sort(mag)
    v = v[::-1]
    peak = v[0]
    if peak == 0:
        return 0.0
    v = v / peak
    t = cell_measure * np.arange(1, v.size + 1, dtype=np.float64)
    if math.isinf(r):
        # sup_lambda lambda d(lambda)^(1/q), attained as lambda -> v_i from below
        return float(peak * np.max(v * t ** (1.0 / q)))
    if r < 1:
        raise ValueError("r must be >= 1 or inf")
    t_prev = t - cell_measure
    # exact integral of (t^(1/q) v_i)^r dt/t over each rearrangement step
    w = (q / r) * (t ** (r / q) - t_prev ** (r / q))
    return float(peak * np.sum(v**r * w) ** (1.0 / r))


def lorentz_quasinorm(obj: ScalarField | Spectrum, q: float, r: float = math.inf,
                      region: Annulus | None = None) -> float:
    """``||f||_{L^{q,r}}``; ``r = inf`` is the weak-L^q quasinorm."""
    return lorentz_from_magnitudes(_magnitudes(obj, region), obj.cell_measure, q, r)


def save_field(obj: ScalarField | Spectrum, path) -> None:
    """Write the flat binary format: 16-byte header then row-major float64 data."""
    spec = obj.spec
    header = _HEADER.pack(MAGIC, spec.dim, spec.n, spec.box_length)
    if isinstance(obj, Spectrum):
        payload = np.ascontiguousarray(obj.values).view(np.float64)
    else:
        payload = np.ascontiguousarray(obj.values)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.astype("<f8", copy=False).tobytes())


def load_field(path) -> ScalarField | Spectrum:
    """Inverse of :func:`save_field`; complex data is recognised by payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for CFL1 header")
    magic, dim, n, box_length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    spec = GridSpec(dim, n, box_length)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    count = n**dim
    if data.size == count:
        return ScalarField(spec, data.reshape(spec.shape))
    if data.size == 2 * count:
        return Spectrum(spec, data.view(np.complex128).reshape(spec.shape))
    raise ValueError(f"payload of {data.size} floats does not match n={n}, dim={dim}")
