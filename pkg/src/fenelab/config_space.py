"""Configuration ball B(0, 1) in R^2: FENE equilibrium, quadrature, stress.

Distributions are stored through ``g = psi / psi_inf`` at polar cell centres.
All R-integrals pair cell values of ``g`` with *exact* per-cell moments of the
equilibrium-weighted kernels (incomplete beta functions), so the integrals of
``psi_inf`` itself are exact at every resolution and the boundary factor
``(1 - r^2)^k`` never enters a stencil.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .errors import HypothesisViolation, InvalidArgument
from .spectral import cell_area

DRAG_TYPES = ("full", "corot")


@dataclass(frozen=True)
class PolymerParams:
    """Model coefficients with We = N = R0 = beta = 1.

    ``re`` may be ``inf``; then ``nu = 0`` and the stress coupling
    ``(1 - epsilon) / re`` vanishes (the Euler limit).
    """

    k: float = 2.0
    epsilon: float = 0.5
    re: float = 1.0
    drag: str = "corot"

    def __post_init__(self):
        drag = {"co-rotational": "corot", "corotational": "corot"}.get(self.drag, self.drag)
        object.__setattr__(self, "drag", drag)
        if drag not in DRAG_TYPES:
            raise InvalidArgument(f"drag must be one of {DRAG_TYPES}, got {self.drag!r}")
        if not self.k > 0:
            raise InvalidArgument("k must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidArgument("epsilon must lie in (0, 1)")
        if not self.re > 0:
            raise InvalidArgument("re must be positive")
        if not 0.0 <= self.nu <= 1.0:
            raise InvalidArgument(f"nu = epsilon/re = {self.nu} must lie in [0, 1]")

    @classmethod
    def with_nu(cls, nu, k=2.0, epsilon=0.5, drag="corot"):
        re = np.inf if nu == 0 else epsilon / nu
        return cls(k=k, epsilon=epsilon, re=float(re), drag=drag)

    @property
    def nu(self):
        return self.epsilon / self.re

    @property
    def stress_coupling(self):
        return (1.0 - self.epsilon) / self.re

    def satisfies_rate_hypothesis(self, p):
        return self.k * (p - 1.0) > 1.0


def radial_moment(n, b, r0, r1):
    """Exact ``int_{r0}^{r1} r^n (1 - r^2)^b dr`` (vectorised over r0, r1)."""
    a = 0.5 * (n + 1.0)
    bb = b + 1.0
    v0 = np.asarray(r0, dtype=float) ** 2
    v1 = np.asarray(r1, dtype=float) ** 2
    scale = 0.5 * beta_fn(a, bb)
    lower = scale * (betainc(a, bb, v1) - betainc(a, bb, v0))
    # near r = 1 the complement keeps relative precision
    upper = scale * (betainc(bb, a, 1.0 - v0) - betainc(bb, a, 1.0 - v1))
    return np.where(v0 >= 0.5, upper, lower)


def _angular_moments(t0, t1):
    """Exact integrals of cos^2, sin*cos, sin^2 over [t0, t1]."""
    s2 = np.sin(2 * t1) - np.sin(2 * t0)
    cc = 0.5 * (t1 - t0) + 0.25 * s2
    ss = 0.5 * (t1 - t0) - 0.25 * s2
    sc = 0.5 * (np.sin(t1) ** 2 - np.sin(t0) ** 2)
    return cc, sc, ss


@dataclass(frozen=True, eq=False)
class ConfigGrid:
    """Polar finite-volume mesh of the unit disk with FENE weights.

    Cells are ``[i dr, (i+1) dr] x [m dtheta, (m+1) dtheta]``; values live at
    the centres ``r_i = (i + 1/2) dr``, ``theta_m = (m + 1/2) dtheta``.
    ``mass[i]`` is the exact equilibrium mass of one cell of ring ``i``
    (normalised so that all cells sum to 1).
    """

    n_r: int
    n_theta: int
    k: float
    dr: float
    dtheta: float
    r: np.ndarray
    theta: np.ndarray
    weights: np.ndarray          # plain dR quadrature, (n_r, n_theta)
    z: float                     # discrete normalisation of (1 - r^2)^k
    mass: np.ndarray             # (n_r,)
    psi_inf_center: np.ndarray   # (n_r,)
    stress_kernel: np.ndarray    # (3, n_r, n_theta): tau11, tau12, tau22 per unit epsilon
    z_kernel: np.ndarray         # (n_r,)
    diff_radial: np.ndarray      # (n_r - 1,) interior radial faces, includes the 1/2
    diff_angular: np.ndarray     # (n_r,)
    geo_r: np.ndarray            # (3, n_r - 1, n_theta)
    geo_a: np.ndarray            # (3, n_r, n_theta)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def ncell(self):
        return self.n_r * self.n_theta

    @property
    def psi_inf_cell(self):
        """Cell averages of the normalised equilibrium."""
        return self.mass / (self.r * self.dr * self.dtheta)

    def mass_weights(self):
        """Equilibrium mass of every cell, ``(n_r, n_theta)``."""
        return np.broadcast_to(self.mass[:, None], (self.n_r, self.n_theta))

    def psi_inf(self, radius):
        """Pointwise normalised equilibrium using the discrete normalisation."""
        radius = np.asarray(radius, dtype=float)
        return np.clip(1.0 - radius ** 2, 0.0, None) ** self.k / self.z

    def cartesian(self):
        """Cell-centre coordinates ``(R1, R2)``, each ``(n_r, n_theta)``."""
        rr = self.r[:, None]
        return rr * np.cos(self.theta)[None, :], rr * np.sin(self.theta)[None, :]


def continuous_z(k):
    """Closed form ``int_B (1 - |R|^2)^k dR = pi / (k + 1)``."""
    return np.pi / (k + 1.0)


def build_config_grid(n_r, n_theta, k):
    if int(n_r) != n_r or n_r < 8:
        raise InvalidArgument("n_r must be an integer >= 8")
    if int(n_theta) != n_theta or n_theta < 8 or n_theta % 2:
        raise InvalidArgument("n_theta must be an even integer >= 8")
    if not k > 0:
        raise InvalidArgument("k must be positive")
    n_r, n_theta, k = int(n_r), int(n_theta), float(k)
    dr = 1.0 / n_r
    dth = 2.0 * np.pi / n_theta
    r = (np.arange(n_r) + 0.5) * dr
    r_lo = np.arange(n_r) * dr
    r_hi = r_lo + dr
    theta = (np.arange(n_theta) + 0.5) * dth
    t_lo = np.arange(n_theta) * dth
    t_hi = t_lo + dth

    raw_mass = dth * radial_moment(1, k, r_lo, r_hi)
    z = float(n_theta * np.sum(raw_mass))
    mass = raw_mass / z

    cc, sc, ss = _angular_moments(t_lo, t_hi)
    m3 = radial_moment(3, k - 1.0, r_lo, r_hi) * (2.0 * k / z)
    stress_kernel = np.stack([
        m3[:, None] * cc[None, :],
        m3[:, None] * sc[None, :],
        m3[:, None] * ss[None, :],
    ])
    # psi_inf / (1 - r) = r (1 + r) (1 - r^2)^(k-1) / z in polar measure
    z_kernel = dth * (radial_moment(1, k - 1.0, r_lo, r_hi)
                      + radial_moment(2, k - 1.0, r_lo, r_hi)) / z

    def psi_pt(x):
        return np.clip(1.0 - x ** 2, 0.0, None) ** k / z

    rf = r_hi[:-1]
    diff_radial = 0.5 * psi_pt(rf) * rf * dth / dr
    diff_angular = 0.5 * psi_pt(r) * dr / (r * dth)

    # drag transport (sigma R) . n times psi_inf, integrated along each face
    geo_r = (rf ** 2 * psi_pt(rf))[None, :, None] * np.stack([cc, sc, ss])[:, None, :]
    tf = t_hi
    s, c = np.sin(tf), np.cos(tf)
    w = (r * dr * psi_pt(r))[:, None]
    # angular rows pair with (s22 - s11, (s12 + s21)/2, (s12 - s21)/2); the last
    # row is uniform on a ring so rigid rotation leaves constants exactly fixed
    geo_a = np.stack([w * (s * c)[None, :], w * (c * c - s * s)[None, :],
                      -np.broadcast_to(w, (n_r, n_theta))])

    weights = np.broadcast_to((r * dr * dth)[:, None], (n_r, n_theta)).copy()
    return ConfigGrid(
        n_r=n_r, n_theta=n_theta, k=k, dr=dr, dtheta=dth, r=r, theta=theta,
        weights=weights, z=z, mass=mass, psi_inf_center=psi_pt(r),
        stress_kernel=stress_kernel, z_kernel=z_kernel,
        diff_radial=diff_radial, diff_angular=diff_angular,
        geo_r=np.ascontiguousarray(geo_r), geo_a=np.ascontiguousarray(geo_a),
    )


@dataclass
class Distribution:
    """``psi(x, R)`` on the ``n x n`` torus lattice times a :class:`ConfigGrid`.

    ``g`` has shape ``(n_r, n_theta, n, n)`` and holds ``psi / psi_inf``.
    """

    grid: ConfigGrid
    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 4 or g.shape[:2] != (self.grid.n_r, self.grid.n_theta) or g.shape[2] != g.shape[3]:
            raise InvalidArgument(f"g has shape {g.shape}, incompatible with the grid")
        self.g = g

    @classmethod
    def equilibrium(cls, grid, n, density=None):
        g = np.ones((grid.n_r, grid.n_theta, n, n))
        if density is not None:
            g *= np.asarray(density)[None, None]
        return cls(grid, g)

    @property
    def n(self):
        return self.g.shape[-1]

    def copy(self):
        return Distribution(self.grid, self.g.copy())

    def flat(self):
        """View of ``g`` as ``(n_r, n_theta, n*n)``."""
        return self.g.reshape(self.grid.n_r, self.grid.n_theta, -1)

    def mass_density(self):
        """Configuration mass ``int psi dR`` at every lattice point."""
        return np.tensordot(self.grid.mass, self.g.sum(axis=1), axes=(0, 0))

    def total_mass(self):
        return float(cell_area(self.n) * np.sum(self.mass_density()))

    def values(self):
        """``psi`` sampled at cell centres."""
        return self.g * self.grid.psi_inf_center[:, None, None, None]

    def check_compatible(self, other):
        if other.grid is not self.grid and (
            other.grid.n_r, other.grid.n_theta, other.grid.k) != (
                self.grid.n_r, self.grid.n_theta, self.grid.k):
            raise InvalidArgument("distributions live on different configuration grids")
        if other.n != self.n:
            raise InvalidArgument("distributions live on different x-lattices")


def weighted_lp_norm(g, grid, p):
    """``(int psi_inf |g|^p dR)^(1/p)`` for ``g`` of shape ``(n_r, n_theta, ...)``."""
    g = np.asarray(g, dtype=float)
    w = grid.mass.reshape((grid.n_r,) + (1,) * (g.ndim - 1))
    if np.isinf(p):
        return np.max(np.abs(g), axis=(0, 1))
    return np.sum(w * np.abs(g) ** p, axis=(0, 1)) ** (1.0 / p)


def stress(g, grid, params):
    """Polymer stress ``tau_ij = epsilon int R_i d_j U psi dR``.

    ``g`` is ``(n_r, n_theta, ...)``; returns ``(2, 2, ...)``.
    """
    g = np.asarray(g, dtype=float)
    t = np.tensordot(grid.stress_kernel, g, axes=([1, 2], [0, 1])) * params.epsilon
    return np.stack([np.stack([t[0], t[1]]), np.stack([t[1], t[2]])])


def stress_field(psi, params):
    """Independent stress components ``(tau11, tau12, tau22)`` as ``(3, n, n)``."""
    grid = psi.grid
    kern = grid.stress_kernel.reshape(3, grid.ncell)
    t = kern @ psi.g.reshape(grid.ncell, -1)
    return (params.epsilon * t).reshape(3, psi.n, psi.n)


def z_integral(g, grid):
    """``int |psi| / (1 - |R|) dR`` with no hypothesis check."""
    g = np.asarray(g, dtype=float)
    w = grid.z_kernel.reshape((grid.n_r,) + (1,) * (g.ndim - 1))
    return np.sum(w * np.abs(g), axis=(0, 1))


def z_functional(g, grid, p):
    """Both sides of the boundary-layer bound: ``((int |psi|/z)^p, int |g|^p psi_inf)``.

    The bound only holds for ``(p - 1) k > 1``; elsewhere this raises.
    """
    if not (p - 1.0) * grid.k > 1.0:
        raise HypothesisViolation(f"(p-1)k = {(p - 1.0) * grid.k} must exceed 1")
    lhs = z_integral(g, grid) ** p
    rhs = weighted_lp_norm(g, grid, p) ** p
    return lhs, rhs
