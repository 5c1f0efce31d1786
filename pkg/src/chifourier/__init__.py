"""Fourier analysis of indicator functions on a periodic box.

Submodules: :mod:`fields` (grids, transforms, Lorentz norms), :mod:`domains`
(shapes and rasters), :mod:`boundary` (neighbourhood volumes, exponent fits),
:mod:`phi` (the smooth dyadic partition), :mod:`littlewood_paley` and
:mod:`experiments` (scenario runner).
"""

from .fields import GridSpec, ScalarField, Spectrum, ConfigurationError

__version__ = "0.1.0"

__all__ = ["GridSpec", "ScalarField", "Spectrum", "ConfigurationError", "__version__"]
