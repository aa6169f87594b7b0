"""Lattice helpers for real fields on the 2-torus [0, 2pi)^2.

Spectral coefficients follow numpy's FFT ordering and are normalised so that
``cos(m x1)`` has coefficient 1/2 at ``xi = (+-m, 0)``.
"""

from functools import lru_cache

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=None)
def wavenumbers(n):
    """Integer lattice ``(k1, k2)``, each ``(n, n)``, axis 0 is x1."""
    k = np.fft.fftfreq(n, 1.0 / n)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=None)
def derivative_wavenumbers(n):
    """Like :func:`wavenumbers` with the Nyquist row/column zeroed."""
    k1, k2 = (a.copy() for a in wavenumbers(n))
    k1[n // 2, :] = 0.0
    k2[:, n // 2] = 0.0
    k1.setflags(write=False)
    k2.setflags(write=False)
    return k1, k2


@lru_cache(maxsize=None)
def rderivative_wavenumbers(n):
    """Derivative wavenumbers on the rfft half plane ``(n, n//2 + 1)``."""
    k1, k2 = derivative_wavenumbers(n)
    h = n // 2 + 1
    return k1[:, :h], k2[:, :h]


@lru_cache(maxsize=None)
def dealias_mask(n):
    """Two-thirds rule: keep ``|k1|, |k2| < n/3``."""
    k1, k2 = wavenumbers(n)
    mask = (np.abs(k1) < n / 3.0) & (np.abs(k2) < n / 3.0)
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=None)
def rfft_weights(n):
    """Multiplicity of each rfft column when summing over the full lattice."""
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def grid_points(n):
    x = TWO_PI * np.arange(n) / n
    return np.meshgrid(x, x, indexing="ij")


def cell_area(n):
    return (TWO_PI / n) ** 2


def to_spectral(values):
    n = values.shape[-1]
    return sfft.fft2(values, axes=(-2, -1)) / (n * n)


def to_physical(coef):
    n = coef.shape[-1]
    return sfft.ifft2(coef * (n * n), axes=(-2, -1)).real


def rfft(values):
    """Unnormalised rfft over the last two axes."""
    return sfft.rfft2(values, axes=(-2, -1))


def irfft(coef, n):
    return sfft.irfft2(coef, s=(n, n), axes=(-2, -1))


def ddx(values):
    """Spectral partial derivatives ``(d/dx1, d/dx2)`` of a real array."""
    n = values.shape[-1]
    k1, k2 = rderivative_wavenumbers(n)
    c = rfft(values)
    return irfft(1j * k1 * c, n), irfft(1j * k2 * c, n)


def lp_norm(values, p, ncomp_axes=0):
    """Rectangle-rule ``L^p`` norm on the torus.

    The leading ``ncomp_axes`` axes are treated as vector/tensor components
    and combined with the Euclidean (Frobenius) norm pointwise.
    """
    n = values.shape[-1]
    a = values
    if ncomp_axes:
        a = np.sqrt(np.sum(values * values, axis=tuple(range(ncomp_axes))))
    else:
        a = np.abs(a)
    if np.isinf(p):
        return float(np.max(a)) if a.size else 0.0
    return float((cell_area(n) * np.sum(a ** p)) ** (1.0 / p))
