"""Bessel functions J0 and J1 for real arguments.

Power series below ``SWITCH`` and the Hankel asymptotic expansion above it.
Both branches are accurate to about 1e-12 absolute at the switchover.
"""

import numpy as np

__all__ = ["j0", "j1", "SWITCH"]

SWITCH = 14.0
_SERIES_TERMS = 60
_ASYMPTOTIC_TERMS = 26


def _series(x, nu):
    # sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)
    z = 0.25 * x * x
    term = np.ones_like(x) if nu == 0 else 0.5 * x
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * (-z / (k * (k + nu)))
        total += term
    return total


def _hankel(x, nu):
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    coeff = 1.0
    inv8x = 1.0 / (8.0 * x)
    power = np.ones_like(x)
    for k in range(1, _ASYMPTOTIC_TERMS):
        coeff *= (mu - (2 * k - 1) ** 2) / k
        power = power * inv8x
        term = coeff * power
        # a_k enters P with sign (-1)^(k/2) for even k and Q with (-1)^((k-1)/2) for odd k
        if k % 2 == 0:
            p += term if (k // 2) % 2 == 0 else -term
        else:
            q += term if ((k - 1) // 2) % 2 == 0 else -term
    omega = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(omega) - q * np.sin(omega))


def _bessel(x, nu):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < SWITCH
    if np.any(small):
        out[small] = _series(ax[small], nu)
    if np.any(~small):
        out[~small] = _hankel(ax[~small], nu)
    if nu == 1:
        out = np.where(x < 0, -out, out)
    return out if out.ndim else float(out)


def j0(x):
    """Bessel function of the first kind, order 0."""
    return _bessel(x, 0)


def j1(x):
    """Bessel function of the first kind, order 1 (odd in ``x``)."""
    return _bessel(x, 1)
