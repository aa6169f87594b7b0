"""Littlewood-Paley blocks and Besov-type norms on the periodic lattice.

The low-pass cutoff is ``chi(rho) = 1`` for ``rho <= 3/4``, ``0`` for
``rho >= 4/3``, with a smooth monotone transition built from the integral of
the bump ``exp(-1/(t(1-t)))``; ``phi(xi) = chi(xi/2) - chi(xi)``.  Block
``j = -1`` is ``chi`` itself, blocks ``j = 0 .. log2(N) - 1`` are
``phi(2^-j xi)``.  The lattice never reaches ``|xi| >= 3N/4`` so the sum of
all multipliers telescopes to exactly one.
"""

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .config_space import Distribution
from .errors import InvalidArgument
from .spectral import (
    TWO_PI, cell_area, derivative_wavenumbers, irfft, rderivative_wavenumbers, rfft, rfft_weights,
    to_physical, to_spectral, wavenumbers,
)

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0
PARTITION_MAGIC = b"FENELP01"

_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (ti * (1.0 - ti)))
    return out


def _bump_integral(t):
    """``int_0^t bump`` for ``t`` in [0, 1/2] by Gauss-Legendre."""
    t = np.asarray(t, dtype=float)
    nodes = 0.5 * t[..., None] * (_GL_X + 1.0)
    return 0.5 * t * np.sum(_GL_W * _bump(nodes), axis=-1)


_BUMP_HALF = float(_bump_integral(np.array(0.5)))


def smooth_step(t):
    """Normalised ``H(t) = int_0^t bump / int_0^1 bump``, exactly 0 and 1 at the ends."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    lo = t <= 0.5
    out = np.empty_like(t)
    out[lo] = 0.5 * _bump_integral(t[lo]) / _BUMP_HALF
    out[~lo] = 1.0 - 0.5 * _bump_integral(1.0 - t[~lo]) / _BUMP_HALF
    return out


def chi(rho):
    """Radial low-pass profile."""
    rho = np.asarray(rho, dtype=float)
    return smooth_step((CHI_OUTER - rho) / (CHI_OUTER - CHI_INNER))


def phi(rho):
    rho = np.asarray(rho, dtype=float)
    return chi(0.5 * rho) - chi(rho)


def _check_n(n):
    if int(n) != n or n < 16 or (int(n) & (int(n) - 1)):
        raise InvalidArgument(f"grid size must be a power of two >= 16, got {n}")
    return int(n)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Sampled multipliers; ``blocks[j + 1]`` is the multiplier of block ``j``."""

    n: int
    blocks: np.ndarray   # (j_max + 2, n, n), FFT ordering

    @property
    def j_min(self):
        return -1

    @property
    def j_max(self):
        return self.blocks.shape[0] - 2

    @property
    def n_blocks(self):
        return self.blocks.shape[0]

    @property
    def indices(self):
        return np.arange(-1, self.j_max + 1)

    @property
    def chi(self):
        return self.blocks[0]

    def check_index(self, j):
        if int(j) != j or not -1 <= j <= self.j_max:
            raise InvalidArgument(f"block index {j} outside [-1, {self.j_max}]")
        return int(j)

    def multiplier(self, j):
        return self.blocks[self.check_index(j) + 1]

    def low_multiplier(self, j):
        """Multiplier of ``S_j = sum_{j' < j} Delta_j'``; valid for ``-1 <= j <= j_max + 1``."""
        if int(j) != j or not -1 <= j <= self.j_max + 1:
            raise InvalidArgument(f"low-pass index {j} outside [-1, {self.j_max + 1}]")
        return self._low[int(j) + 1]

    @property
    def _low(self):
        cache = self.__dict__.get("_low_cache")
        if cache is None:
            cache = np.concatenate([np.zeros((1, self.n, self.n)), np.cumsum(self.blocks, axis=0)])
            object.__setattr__(self, "_low_cache", cache)
        return cache

    @property
    def rblocks(self):
        """Block multipliers restricted to the rfft half plane."""
        cache = self.__dict__.get("_rblocks")
        if cache is None:
            cache = np.ascontiguousarray(self.blocks[:, :, : self.n // 2 + 1])
            object.__setattr__(self, "_rblocks", cache)
        return cache

    def rlow(self, j):
        return self.low_multiplier(j)[:, : self.n // 2 + 1]


@lru_cache(maxsize=None)
def build_partition(n):
    n = _check_n(n)
    k1, k2 = wavenumbers(n)
    radius = np.sqrt(k1 ** 2 + k2 ** 2)
    j_max = int(np.log2(n)) - 1
    # evaluate chi once on the unique radii of all dilations
    scales = 2.0 ** -np.arange(0, j_max + 2)
    uniq, inv = np.unique(radius, return_inverse=True)
    table = chi(np.outer(scales, uniq))
    lows = table[:, inv].reshape(j_max + 2, n, n)
    blocks = np.empty((j_max + 2, n, n))
    blocks[0] = lows[0]
    blocks[1:] = lows[1:] - lows[:-1]
    blocks.setflags(write=False)
    part = DyadicPartition(n, blocks)
    # S_j = chi(2^-j D) directly, so it is exactly one wherever chi is
    low = np.concatenate([np.zeros((1, n, n)), lows])
    low.setflags(write=False)
    object.__setattr__(part, "_low_cache", low)
    return part


def save_partition(path, part):
    """Flat binary: magic, int32 N, int32 n_blocks, float64 samples.

    Blocks are j-major from ``j = -1``; each block is row-major over
    ``(xi1, xi2)`` with both indices ascending from ``-N/2``.
    """
    with open(path, "wb") as fh:
        fh.write(PARTITION_MAGIC)
        fh.write(struct.pack("<ii", part.n, part.n_blocks))
        data = np.fft.fftshift(part.blocks, axes=(-2, -1))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load_partition(path):
    with open(path, "rb") as fh:
        if fh.read(8) != PARTITION_MAGIC:
            raise InvalidArgument(f"{path}: not a partition file")
        n, nb = struct.unpack("<ii", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nb * n * n:
        raise InvalidArgument(f"{path}: truncated partition data")
    blocks = np.fft.ifftshift(data.reshape(nb, n, n), axes=(-2, -1)).copy()
    blocks.setflags(write=False)
    return DyadicPartition(n, blocks)


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        if not 1.0 <= self.p < np.inf:
            raise InvalidArgument("p must satisfy 1 <= p < inf")
        if not 1.0 <= self.r < np.inf:
            raise InvalidArgument("r must satisfy 1 <= r < inf")

    @property
    def on_theorem_path(self):
        return 2.0 <= self.p <= self.r

    def shifted(self, ds):
        return BesovParams(self.s + ds, self.p, self.r)


class SpectralField:
    """Real scalar or 2-vector field on the torus held as normalised FFT coefficients."""

    def __init__(self, coef, divergence_free=False):
        coef = np.asarray(coef, dtype=complex)
        if coef.ndim == 2:
            coef = coef[None]
        if coef.ndim != 3 or coef.shape[1] != coef.shape[2] or coef.shape[0] not in (1, 2):
            raise InvalidArgument(f"coefficients of shape {coef.shape} are not (c, N, N)")
        _check_n(coef.shape[-1])
        self.coef = coef
        self.divergence_free = bool(divergence_free)

    @classmethod
    def from_physical(cls, values, divergence_free=False):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        return cls(to_spectral(values), divergence_free)

    @classmethod
    def zeros(cls, n, ncomp=2):
        return cls(np.zeros((ncomp, n, n), dtype=complex), divergence_free=ncomp == 2)

    @property
    def n(self):
        return self.coef.shape[-1]

    @property
    def ncomp(self):
        return self.coef.shape[0]

    def physical(self):
        return to_physical(self.coef)

    def hermitian_defect(self):
        """``max |c(-xi) - conj c(xi)|`` relative to ``max |c|``."""
        flipped = np.roll(self.coef[:, ::-1, ::-1], 1, axis=(1, 2))
        scale = max(np.max(np.abs(self.coef)), 1e-300)
        return float(np.max(np.abs(flipped - np.conj(self.coef))) / scale)

    def divergence_defect(self):
        if self.ncomp != 2:
            raise InvalidArgument("divergence of a scalar field")
        k1, k2 = derivative_wavenumbers(self.n)
        div = k1 * self.coef[0] + k2 * self.coef[1]
        scale = max(np.max(np.hypot(k1, k2) * np.abs(self.coef).max(axis=0)), 1e-300)
        return float(np.max(np.abs(div)) / scale)

    def __add__(self, other):
        return SpectralField(self.coef + other.coef, self.divergence_free and other.divergence_free)

    def __sub__(self, other):
        return SpectralField(self.coef - other.coef, self.divergence_free and other.divergence_free)

    def __mul__(self, a):
        return SpectralField(self.coef * a, self.divergence_free)

    __rmul__ = __mul__


def _coerce_field(f):
    if isinstance(f, SpectralField):
        return f
    return SpectralField.from_physical(f)


def lp_block(f, j):
    """``Delta_j f``."""
    f = _coerce_field(f)
    part = build_partition(f.n)
    return SpectralField(f.coef * part.multiplier(j), f.divergence_free)


def low_freq(f, j):
    """``S_j f``; ``j = j_max + 1`` is the identity."""
    if isinstance(f, Distribution):
        return _distribution_low(f, j)
    f = _coerce_field(f)
    part = build_partition(f.n)
    return SpectralField(f.coef * part.low_multiplier(j), f.divergence_free)


def _distribution_low(psi, j):
    part = build_partition(psi.n)
    # subtract the high part so band-limited data pass through bit-exactly
    high = 1.0 - part.rlow(j)
    if not np.any(high):
        return psi.copy()
    g = psi.g - irfft(rfft(psi.g) * high, psi.n)
    return Distribution(psi.grid, g)


def distribution_block(psi, j):
    part = build_partition(psi.n)
    g = irfft(rfft(psi.g) * part.rblocks[part.check_index(j) + 1], psi.n)
    return Distribution(psi.grid, g)


# --- block norms ------------------------------------------------------------

def field_block_norms(values, p):
    """``||Delta_j f||_{L^p}`` for every block, ``j = -1 .. j_max``.

    ``values`` is physical, ``(n, n)`` or ``(c, n, n)``; vectors use the
    pointwise Euclidean norm.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    n = values.shape[-1]
    part = build_partition(n)
    coef = rfft(values)
    if p == 2:
        w = rfft_weights(n)
        power = np.sum(np.abs(coef) ** 2, axis=0) * w
        sums = np.einsum("jab,ab->j", part.rblocks ** 2, power)
        return np.sqrt(np.maximum(sums, 0.0)) * (TWO_PI / (n * n))
    blocks = irfft(coef[None] * part.rblocks[:, None], n)
    mag = np.sqrt(np.sum(blocks ** 2, axis=1))
    return (cell_area(n) * np.sum(mag ** p, axis=(-2, -1))) ** (1.0 / p)


def distribution_block_norms(psi, p):
    """``||Delta_j psi||_{L^p_x(L^p)}`` for every block."""
    grid = psi.grid
    n = psi.n
    part = build_partition(n)
    flat = psi.g.reshape(grid.ncell, n, n)
    wcell = grid.mass_weights().reshape(-1)
    coef = rfft(flat)
    if p == 2:
        power = np.tensordot(wcell, np.abs(coef) ** 2, axes=(0, 0)) * rfft_weights(n)
        sums = np.einsum("jab,ab->j", part.rblocks ** 2, power)
        return np.sqrt(np.maximum(sums, 0.0)) * (TWO_PI / (n * n))
    out = np.empty(part.n_blocks)
    for b in range(part.n_blocks):
        vals = irfft(coef * part.rblocks[b], n).reshape(grid.ncell, -1)
        out[b] = (cell_area(n) * _kernels.active.weighted_pow_sum(vals, wcell, float(p))) ** (1.0 / p)
    return out


def block_norms(obj, p):
    if isinstance(obj, Distribution):
        return distribution_block_norms(obj, p)
    if isinstance(obj, SpectralField):
        return field_block_norms(obj.physical(), p)
    return field_block_norms(obj, p)


def combine_blocks(norms, s, r):
    """``|| (2^{js} a_j)_j ||_{l^r}`` with ``j`` starting at -1."""
    norms = np.asarray(norms, dtype=float)
    j = np.arange(-1, norms.shape[-1] - 1)
    weighted = norms * 2.0 ** (j * s)
    return np.sum(weighted ** r, axis=-1) ** (1.0 / r)


def besov_norm(f, bp):
    return float(combine_blocks(block_norms(f, bp.p), bp.s, bp.r))


def besov_lp_norm(psi, bp):
    if not isinstance(psi, Distribution):
        raise InvalidArgument("besov_lp_norm expects a Distribution")
    return float(combine_blocks(distribution_block_norms(psi, bp.p), bp.s, bp.r))


# --- time-integrated norms --------------------------------------------------

def time_norm(samples, times, rho):
    """``L^rho`` in time along axis 0; trapezoid for finite ``rho``, max for inf."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 0:
        raise InvalidArgument("empty history")
    if np.isinf(rho):
        return np.max(samples, axis=0)
    if samples.shape[0] == 1:
        return np.zeros(samples.shape[1:])
    return np.trapezoid(samples ** rho, x=np.asarray(times, dtype=float), axis=0) ** (1.0 / rho)


def chemin_lerner_from_blocks(block_history, times, s, r, rho):
    return float(combine_blocks(time_norm(block_history, times, rho), s, r))


def chemin_lerner_norm(history, bp, rho, times=None, dt=None):
    """``||u||_{L~^rho_T(B^s_{p,r})}`` for a sampled history.

    ``history`` is a sequence of fields (physical arrays, :class:`SpectralField`)
    or :class:`Distribution` objects; give either ``times`` or a uniform ``dt``.
    """
    history = list(history)
    if not history:
        raise InvalidArgument("empty history")
    if rho not in (1, 2, np.inf):
        raise InvalidArgument("rho must be 1, 2 or inf")
    if times is None:
        if dt is None and not np.isinf(rho):
            raise InvalidArgument("times or dt required for finite rho")
        times = np.arange(len(history)) * (dt or 0.0)
    blocks = np.array([block_norms(h, bp.p) for h in history])
    return chemin_lerner_from_blocks(blocks, times, bp.s, bp.r, rho)


def signed_power(g, a):
    return np.sign(g) * np.abs(g) ** a


def dissipation_blocks(psi, p):
    """Per-block ``int int psi_inf |grad_R (Delta_j g)^{p/2}|^2 dR dx`` at one time."""
    grid = psi.grid
    n = psi.n
    part = build_partition(n)
    coef = rfft(psi.g)
    cr = 2.0 * grid.diff_radial
    ca = 2.0 * grid.diff_angular
    out = np.empty(part.n_blocks)
    for b in range(part.n_blocks):
        blk = irfft(coef * part.rblocks[b], n).reshape(grid.n_r, grid.n_theta, -1)
        if p != 2:
            blk = signed_power(blk, 0.5 * p)
        out[b] = cell_area(n) * np.sum(_kernels.active.dirichlet_form(np.ascontiguousarray(blk), cr, ca))
    return out


def e_tilde_rates(history, p):
    """Dissipation integrand per time sample and block, ``(n_t, n_blocks)``."""
    history = list(history)
    if not history:
        raise InvalidArgument("empty history")
    return np.array([dissipation_blocks(psi, p) for psi in history])


def e_tilde_norm(history, bp, times=None, dt=None):
    """``|| (2^{js} (int_0^T D_j dt)^{1/p})_j ||_{l^r}``."""
    rates = e_tilde_rates(history, bp.p)
    if times is None:
        if dt is None:
            raise InvalidArgument("times or dt required")
        times = np.arange(len(rates)) * dt
    if len(rates) == 1:
        integral = np.zeros(rates.shape[1])
    else:
        integral = np.trapezoid(rates, x=np.asarray(times, dtype=float), axis=0)
    return float(combine_blocks(np.maximum(integral, 0.0) ** (1.0 / bp.p), bp.s, bp.r))


# --- commutator -------------------------------------------------------------

def _require_div_free(v, tol=1e-10):
    v = _coerce_field(v)
    if v.ncomp != 2:
        raise InvalidArgument("advecting field must be a 2-vector")
    if v.divergence_defect() > tol:
        raise InvalidArgument("advecting field is not divergence-free")
    return v


def _commutator_parts(v, g):
    """Shared transforms for ``[v . grad, Delta_j] g`` over all blocks."""
    n = g.shape[-1]
    k1, k2 = rderivative_wavenumbers(n)
    vel = v.physical()
    G = rfft(g)
    gx = irfft(1j * k1 * G, n)
    gy = irfft(1j * k2 * G, n)
    VG = rfft(vel[0] * gx + vel[1] * gy)
    return vel, G, VG, k1, k2


def _commutator_block(parts, mult, n):
    vel, G, VG, k1, k2 = parts
    B = G * mult
    return vel[0] * irfft(1j * k1 * B, n) + vel[1] * irfft(1j * k2 * B, n) - irfft(VG * mult, n)


def commutator(v, psi, j):
    """``R_j = v . grad(Delta_j psi) - Delta_j(v . grad psi)``."""
    v = _require_div_free(v)
    if v.n != psi.n:
        raise InvalidArgument("velocity and distribution live on different lattices")
    part = build_partition(psi.n)
    mult = part.rblocks[part.check_index(j) + 1]
    g = _commutator_block(_commutator_parts(v, psi.g), mult, psi.n)
    return Distribution(psi.grid, g)


def commutator_block_norms(v, psi, p):
    """``||R_j||_{L^p_x(L^p)}`` for every ``j``, sharing the transforms."""
    v = _require_div_free(v)
    grid = psi.grid
    n = psi.n
    part = build_partition(n)
    parts = _commutator_parts(v, psi.g)
    wcell = grid.mass_weights().reshape(-1)
    out = np.empty(part.n_blocks)
    for b in range(part.n_blocks):
        rj = _commutator_block(parts, part.rblocks[b], n).reshape(grid.ncell, -1)
        out[b] = (cell_area(n) * _kernels.active.weighted_pow_sum(rj, wcell, float(p))) ** (1.0 / p)
    return out
