"""Configuration-space Fokker-Planck dynamics and x-advection of ``g = psi/psi_inf``.

The R-operator is discretised in conservative finite-volume form: for each
cell ``c`` with equilibrium mass ``M_c``

    M_c dg_c/dt = sum over faces of (diffusive flux - drag flux),

with zero flux through ``r = 0`` and ``r = 1``.  Diffusion is integrated by
TR-BDF2 (both stages share one matrix, L-stable), block-diagonalised by a
real Fourier basis in theta so that every angular mode is one tridiagonal
radial solve.
Drag is explicit (Heun) and Strang-split around the diffusion.
"""

import numpy as np

from . import _kernels
from .config_space import Distribution
from .errors import InvalidArgument, NumericalBreakdown, StabilityError
from .lp_besov import SpectralField, signed_power
from .spectral import (
    TWO_PI, cell_area, dealias_mask, derivative_wavenumbers, irfft,
    rderivative_wavenumbers, rfft, to_physical,
)

GAMMA = 2.0 - np.sqrt(2.0)
_ALPHA = 1.0 / (GAMMA * (2.0 - GAMMA))
_BETA = (1.0 - GAMMA) ** 2 / (GAMMA * (2.0 - GAMMA))
CFL_LIMIT = 0.5


def velocity_gradient(u):
    """``grad[a, b] = d_b u_a`` as a ``(2, 2, n, n)`` physical array."""
    if not isinstance(u, SpectralField):
        u = SpectralField.from_physical(u)
    k1, k2 = derivative_wavenumbers(u.n)
    d = np.stack([1j * k1 * u.coef, 1j * k2 * u.coef], axis=1)
    return to_physical(d)


def drag(grad, drag_type="corot"):
    """``sigma = grad u`` (full) or its antisymmetric part (co-rotational)."""
    grad = np.asarray(grad, dtype=float)
    if drag_type == "full":
        return grad.copy()
    if drag_type in ("corot", "co-rotational"):
        return 0.5 * (grad - np.swapaxes(grad, 0, 1))
    raise InvalidArgument(f"unknown drag type {drag_type!r}")


def drag_field(u, drag_type):
    return drag(velocity_gradient(u), drag_type)


def _sig4(sigma, nx):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[:2] != (2, 2):
        raise InvalidArgument("sigma must have leading shape (2, 2)")
    s = sigma.reshape(4, -1)
    if s.shape[1] == 1 and nx != 1:
        s = np.repeat(s, nx, axis=1)
    return np.ascontiguousarray(s)


def _as_cells(g, grid):
    g = np.asarray(g, dtype=float)
    if g.shape[:2] != (grid.n_r, grid.n_theta):
        raise InvalidArgument(f"g of shape {g.shape} does not match the grid")
    return g.reshape(grid.n_r, grid.n_theta, -1)


def angular_basis(n_theta):
    """Orthonormal real Fourier basis over the angular index and its eigenvalues.

    Rows diagonalise the periodic second difference: ``lam`` is
    ``2 - 2 cos(2 pi q / n_theta)`` for the row's wavenumber ``q``.
    """
    m = np.arange(n_theta)
    rows, lam = [np.full(n_theta, 1.0 / np.sqrt(n_theta))], [0.0]
    for q in range(1, n_theta // 2):
        a = TWO_PI * q * m / n_theta
        rows += [np.sqrt(2.0 / n_theta) * np.cos(a), np.sqrt(2.0 / n_theta) * np.sin(a)]
        lam += [2.0 - 2.0 * np.cos(TWO_PI * q / n_theta)] * 2
    rows.append((-1.0) ** m / np.sqrt(n_theta))
    lam.append(4.0)
    return np.array(rows), np.array(lam)


class FokkerPlanckSolver:
    """Prefactored R-space operators for one :class:`ConfigGrid`."""

    def __init__(self, grid):
        self.grid = grid
        self.kernels = _kernels.active
        self.basis, self.lam = angular_basis(grid.n_theta)
        self.basis_t = np.ascontiguousarray(self.basis.T)
        b = grid.diff_radial
        self.b_left = np.concatenate([[0.0], b])
        self.b_right = np.concatenate([b, [0.0]])
        self.inv_mass = 1.0 / grid.mass
        self._factor_cache = {}

    def factors(self, dt):
        """Thomas factors of ``M - (gamma dt / 2) A`` for every angular row."""
        key = float(dt)
        f = self._factor_cache.get(key)
        if f is not None:
            return f
        grid = self.grid
        c = 0.5 * GAMMA * dt
        diag_a = -(self.b_left + self.b_right)[None, :] - self.lam[:, None] * grid.diff_angular[None, :]
        diag_l = grid.mass[None, :] - c * diag_a
        off_l = np.broadcast_to(-c * grid.diff_radial, (self.lam.size, grid.n_r - 1))
        nq, nr = diag_l.shape
        lower = np.zeros((nq, nr))
        lower[:, 1:] = off_l
        cprime = np.zeros((nq, nr))
        inv_den = np.empty((nq, nr))
        den = diag_l[:, 0].copy()
        for i in range(nr):
            if i:
                den = diag_l[:, i] - off_l[:, i - 1] * cprime[:, i - 1]
            if np.any(den <= 0):
                raise NumericalBreakdown("diffusion matrix lost positive definiteness")
            inv_den[:, i] = 1.0 / den
            if i < nr - 1:
                cprime[:, i] = off_l[:, i] * inv_den[:, i]
        f = (lower, cprime, inv_den, c)
        if len(self._factor_cache) > 8:
            self._factor_cache.clear()
        self._factor_cache[key] = f
        return f

    def apply_diffusion(self, g):
        """``A g / M`` for ``g`` of shape ``(n_r, n_theta, X)``."""
        grid = self.grid
        ag = self.kernels.diffusion_apply(np.ascontiguousarray(g), grid.diff_radial, grid.diff_angular)
        return ag * self.inv_mass[:, None, None]

    def drag_tendency(self, g, sig4):
        grid = self.grid
        return self.kernels.drag_tendency(
            np.ascontiguousarray(g), sig4, grid.geo_r, grid.geo_a, self.inv_mass)

    def rhs(self, g, sig4=None):
        out = self.apply_diffusion(g)
        if sig4 is not None:
            out += self.drag_tendency(g, sig4)
        return out

    def diffuse(self, g, dt):
        """One TR-BDF2 step in increment form, so constants are kept exactly.

        With ``L = M - c A`` (``c = gamma dt / 2``) the two stages are
        ``L d1 = 2c A g`` and ``L d2 = alpha M d1 + c A g``; the result is
        ``g + d2``.
        """
        lower, cprime, inv_den, c = self.factors(dt)
        k = self.kernels
        grid = self.grid
        ag = k.diffusion_apply(np.ascontiguousarray(g), grid.diff_radial, grid.diff_angular)
        ah = np.matmul(self.basis, ag)
        d1 = k.thomas_solve(lower, cprime, inv_den, (2.0 * c) * ah)
        rhs = (_ALPHA * grid.mass)[:, None, None] * d1
        rhs += c * ah
        d2 = k.thomas_solve(lower, cprime, inv_den, rhs)
        return g + np.matmul(self.basis_t, d2)

    def drag_step(self, g, sig4, dt):
        """Heun step of the drag term alone."""
        grid = self.grid
        return self.kernels.drag_heun(
            np.ascontiguousarray(g), sig4, grid.geo_r, grid.geo_a, self.inv_mass, float(dt))

    def step(self, g, sig4, dt):
        """Strang step ``drag(dt/2) diffusion(dt) drag(dt/2)``; ``sig4=None`` skips drag."""
        if sig4 is not None:
            g = self.drag_step(g, sig4, 0.5 * dt)
        g = self.diffuse(g, dt)
        if sig4 is not None:
            g = self.drag_step(g, sig4, 0.5 * dt)
        return g


def solver_for(grid):
    s = grid._cache.get("fp_solver")
    if s is None or s.kernels is not _kernels.active:
        s = FokkerPlanckSolver(grid)
        grid._cache["fp_solver"] = s
    return s


def fp_rhs(g, sigma, grid):
    """``dg/dt`` of the R-dynamics for ``g`` of shape ``(n_r, n_theta, ...)``."""
    g = np.asarray(g, dtype=float)
    cells = _as_cells(g, grid)
    sig4 = None if sigma is None else _sig4(sigma, cells.shape[-1])
    return solver_for(grid).rhs(np.ascontiguousarray(cells), sig4).reshape(g.shape)


def fp_step(psi, sigma, dt):
    """Advance the R-dynamics by ``dt`` at every lattice point.

    ``sigma`` is ``(2, 2, n, n)`` (or ``(2, 2)`` for a uniform tensor, or
    ``None`` for pure relaxation).
    """
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    grid = psi.grid
    cells = np.ascontiguousarray(psi.flat())
    sig4 = None
    if sigma is not None and np.any(sigma):
        sig4 = _sig4(sigma, cells.shape[-1])
    g = solver_for(grid).step(cells, sig4, dt)
    if not np.all(np.isfinite(g)):
        raise NumericalBreakdown("non-finite values in the Fokker-Planck step")
    return Distribution(grid, g.reshape(psi.g.shape))


def check_cfl(u_phys, dt):
    n = u_phys.shape[-1]
    speed = float(np.max(np.sqrt(np.sum(u_phys ** 2, axis=0))))
    courant = speed * dt * n / TWO_PI
    if courant > CFL_LIMIT:
        raise StabilityError(f"CFL number {courant:.3f} exceeds {CFL_LIMIT}")
    return courant


def is_x_uniform(g):
    """True when every cell holds the same value at all lattice points."""
    ref = g[..., :1, :1]
    return bool(np.all(g == ref))


def advect(psi, u, dt):
    """Advance ``g_t + u . grad g = 0`` by SSP-RK3 with spectral derivatives.

    The tendency is truncated by the two-thirds rule, as in the momentum
    equation.
    """
    if not isinstance(u, SpectralField):
        u = SpectralField.from_physical(u, divergence_free=True)
    if u.n != psi.n:
        raise InvalidArgument("velocity and distribution live on different lattices")
    vel = u.physical()
    check_cfl(vel, dt)
    if not np.any(vel) or is_x_uniform(psi.g):
        return psi.copy()
    n = psi.n
    k1, k2 = rderivative_wavenumbers(n)
    mask = dealias_mask(n)[:, : n // 2 + 1].astype(float)
    ik1 = 1j * k1
    ik2 = 1j * k2
    ux, uy = vel

    def tendency(G):
        gx = irfft(ik1 * G, n)
        gy = irfft(ik2 * G, n)
        return -mask * rfft(ux * gx + uy * gy)

    G0 = rfft(psi.g)
    G1 = G0 + dt * tendency(G0)
    G2 = 0.75 * G0 + 0.25 * (G1 + dt * tendency(G1))
    G3 = (G0 + 2.0 * (G2 + dt * tendency(G2))) / 3.0
    g = irfft(G3, n)
    if not np.all(np.isfinite(g)):
        raise NumericalBreakdown("non-finite values in advection")
    return Distribution(psi.grid, g)


# --- diagnostics ------------------------------------------------------------

def moment(psi, p):
    """``int int |g|^p psi_inf dR dx``."""
    grid = psi.grid
    vals = psi.g.reshape(grid.ncell, -1)
    w = grid.mass_weights().reshape(-1)
    return cell_area(psi.n) * _kernels.active.weighted_pow_sum(vals, w, float(p))


def dissipation(psi, p):
    """``int int psi_inf |grad_R g^{p/2}|^2 dR dx`` with the signed power."""
    grid = psi.grid
    v = psi.flat()
    if p != 2:
        v = signed_power(v, 0.5 * p)
    e = _kernels.active.dirichlet_form(np.ascontiguousarray(v), 2.0 * grid.diff_radial,
                                       2.0 * grid.diff_angular)
    return cell_area(psi.n) * float(np.sum(e))


def entropy_report(history, p):
    """Moment and dissipation series ``(moments, dissipations)`` for a trajectory."""
    history = list(history)
    m = np.array([moment(psi, p) for psi in history])
    d = np.array([dissipation(psi, p) for psi in history])
    return m, d


def gronwall_constant(times, moments, sigma_sq):
    """Smallest ``c`` with ``m(t) <= m(0) exp(c int_0^t sigma^2)`` on the samples.

    ``sigma_sq`` holds ``||sigma(t)||^2`` at the same times.
    """
    times = np.asarray(times, dtype=float)
    moments = np.asarray(moments, dtype=float)
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    acc = np.concatenate([[0.0], np.cumsum(0.5 * (sigma_sq[1:] + sigma_sq[:-1]) * np.diff(times))])
    growth = np.log(moments / moments[0])
    ok = acc > 0
    if not np.any(ok):
        return 0.0
    return float(max(0.0, np.max(growth[ok] / acc[ok])))
