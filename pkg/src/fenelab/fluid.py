"""Pseudo-spectral incompressible momentum equation on the 2-torus.

    u_t + u . grad u - nu Lap u + grad P = ((1 - eps)/Re) div tau + f,   div u = 0

The projected nonlinear and stress terms are advanced by a three-stage SSP
Runge-Kutta scheme wrapped in the exact viscous integrating factor
``E(t) = exp(-nu |xi|^2 t)``; with ``nu = 0`` this is the plain Euler step.
Tendencies are truncated by the two-thirds rule and the mean is pinned to 0.
"""

import numpy as np

from .errors import InvalidArgument, NumericalBreakdown, StabilityError
from .lp_besov import SpectralField
from .spectral import (
    TWO_PI, dealias_mask, derivative_wavenumbers, grid_points, to_physical, to_spectral,
)

CFL_LIMIT = 0.5


def _k2_safe(n):
    k1, k2 = derivative_wavenumbers(n)
    kk = k1 ** 2 + k2 ** 2
    return k1, k2, np.where(kk == 0, 1.0, kk)


def leray_coef(coef):
    """Leray projection of ``(2, n, n)`` coefficients; the zero mode is kept."""
    n = coef.shape[-1]
    k1, k2, kk = _k2_safe(n)
    dot = (k1 * coef[0] + k2 * coef[1]) / kk
    return np.stack([coef[0] - k1 * dot, coef[1] - k2 * dot])


def leray_project(f):
    if not isinstance(f, SpectralField):
        f = SpectralField.from_physical(f)
    if f.ncomp != 2:
        raise InvalidArgument("Leray projection needs a vector field")
    return SpectralField(leray_coef(f.coef), divergence_free=True)


def divergence_coef(coef):
    k1, k2 = derivative_wavenumbers(coef.shape[-1])
    return 1j * (k1 * coef[0] + k2 * coef[1])


def divergence(u):
    """Physical ``div u`` (spectral derivatives)."""
    return to_physical(divergence_coef(u.coef))


def max_divergence(u):
    return float(np.max(np.abs(divergence(u))))


def gradient_coef(coef):
    """``d_b u_a`` coefficients, shape ``(2, 2, n, n)``."""
    k1, k2 = derivative_wavenumbers(coef.shape[-1])
    return np.stack([1j * k1 * coef, 1j * k2 * coef], axis=1)


def advection_coef(a_phys, coef):
    """Coefficients of ``(a . grad) v`` for physical ``a`` and coefficients of ``v``."""
    grad = to_physical(gradient_coef(coef))
    prod = a_phys[0][None] * grad[:, 0] + a_phys[1][None] * grad[:, 1]
    return to_spectral(prod)


def stress_divergence_coef(tau):
    """``div tau`` for ``tau = (tau11, tau12, tau22)`` physical, ``(3, n, n)``."""
    t = to_spectral(np.asarray(tau, dtype=float))
    k1, k2 = derivative_wavenumbers(t.shape[-1])
    return np.stack([1j * (k1 * t[0] + k2 * t[1]), 1j * (k1 * t[1] + k2 * t[2])])


def _forcing_coef(tau, f_ext, params, n):
    out = np.zeros((2, n, n), dtype=complex)
    if tau is not None and params.stress_coupling != 0.0:
        out += params.stress_coupling * stress_divergence_coef(tau)
    if f_ext is not None:
        fe = f_ext.coef if isinstance(f_ext, SpectralField) else to_spectral(np.asarray(f_ext, dtype=float))
        out += fe
    return out


def pressure(u, tau, f_ext, params):
    """``P = Lap^{-1} div(((1 - eps)/Re) div tau + f - u . grad u)``.

    With this sign ``grad P`` is exactly the gradient part of the momentum
    forcing, i.e. ``(I - Leray)`` applied to it.
    """
    n = u.n
    w = _forcing_coef(tau, f_ext, params, n) - advection_coef(u.physical(), u.coef)
    _, _, kk = _k2_safe(n)
    p = -divergence_coef(w) / kk
    p[0, 0] = 0.0
    return SpectralField(p)


def momentum_forcing(u, tau, f_ext, params):
    """Unprojected ``((1 - eps)/Re) div tau + f - u . grad u`` as a vector field."""
    w = _forcing_coef(tau, f_ext, params, u.n) - advection_coef(u.physical(), u.coef)
    return SpectralField(w)


def _tendency(coef, forcing, advecting, nonlinear):
    n = coef.shape[-1]
    w = forcing.copy()
    if nonlinear:
        a = to_physical(coef) if advecting is None else advecting
        w -= advection_coef(a, coef)
    w = leray_coef(w) * dealias_mask(n)
    w[:, 0, 0] = 0.0
    return w


def ns_rhs(u, tau, params, f_ext=None):
    """Projected ``-u . grad u + ((1 - eps)/Re) div tau (+ f)``; viscosity excluded."""
    forcing = _forcing_coef(tau, f_ext, params, u.n)
    return SpectralField(_tendency(u.coef, forcing, None, True), divergence_free=True)


def check_cfl(u_phys, dt):
    n = u_phys.shape[-1]
    speed = float(np.max(np.sqrt(np.sum(u_phys ** 2, axis=0))))
    courant = speed * dt * n / TWO_PI
    if courant > CFL_LIMIT:
        raise StabilityError(f"CFL number {courant:.3f} exceeds {CFL_LIMIT}")
    return courant


def viscous_factor(n, nu, t):
    k1, k2 = derivative_wavenumbers(n)
    return np.exp(-nu * (k1 ** 2 + k2 ** 2) * t)


def ns_step(u, tau, dt, params, f_ext=None, advecting=None, nonlinear=True, stages=None):
    """One integrating-factor SSP-RK3 step of the momentum equation.

    ``tau`` (physical ``(3, n, n)`` or ``None``) and ``f_ext`` are frozen over
    the step.  ``advecting`` optionally gives the three physical velocities
    that transport ``u`` in each stage (the linearised Picard equation);
    by default the stage values themselves are used.  When ``stages`` is a
    list the physical stage velocities are appended to it.
    """
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    n = u.n
    nu = params.nu
    forcing = _forcing_coef(tau, f_ext, params, n)
    c0 = u.coef
    e_full = viscous_factor(n, nu, dt)
    e_half = viscous_factor(n, nu, 0.5 * dt)
    e_back = viscous_factor(n, nu, -0.5 * dt)

    def stage(coef, k):
        a = None if advecting is None else advecting[k]
        if nonlinear:
            phys = to_physical(coef)
            check_cfl(phys if a is None else a, dt)
            if stages is not None:
                stages.append(phys)
            if a is None:
                a = phys
        return coef + dt * _tendency(coef, forcing, a, nonlinear)

    v1 = e_full * stage(c0, 0)
    v2 = 0.75 * e_half * c0 + 0.25 * e_back * stage(v1, 1)
    c3 = (e_full * c0 + 2.0 * e_half * stage(v2, 2)) / 3.0
    c3[:, 0, 0] = 0.0
    if not np.all(np.isfinite(c3)):
        raise NumericalBreakdown("non-finite velocity coefficients")
    return SpectralField(c3, divergence_free=True)


def energy(u):
    """``||u||_{L^2}^2`` by Parseval."""
    return float(TWO_PI ** 2 * np.sum(np.abs(u.coef) ** 2))


def l2_distance(u, v):
    return float(TWO_PI * np.sqrt(np.sum(np.abs(u.coef - v.coef) ** 2)))


# --- scalar transport-diffusion ---------------------------------------------

def transport_diffusion(f0, v, source, nu, dt, t_end, stride=1):
    """Integrate ``f_t + v . grad f - nu Lap f = g`` with the same scheme as :func:`ns_step`.

    ``f0`` and ``v`` are physical arrays (scalar ``(n, n)``, velocity
    ``(2, n, n)``), ``source(t)`` returns the physical forcing or ``None``.
    Returns ``(times, history)`` with physical snapshots every ``stride`` steps.
    """
    f0 = np.asarray(f0, dtype=float)
    n = f0.shape[-1]
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(t_end, 1.0):
        raise InvalidArgument("t_end must be a positive multiple of dt")
    check_cfl(np.asarray(v), dt)
    mask = dealias_mask(n)
    k1, k2 = derivative_wavenumbers(n)
    vx, vy = v
    e_full = viscous_factor(n, nu, dt)
    e_half = viscous_factor(n, nu, 0.5 * dt)
    e_back = viscous_factor(n, nu, -0.5 * dt)

    def rhs(c, t):
        fx = to_physical(1j * k1 * c)
        fy = to_physical(1j * k2 * c)
        w = -to_spectral(vx * fx + vy * fy)
        if source is not None:
            g = source(t)
            if g is not None:
                w += to_spectral(g)
        return w * mask

    c = to_spectral(f0)
    times, hist = [0.0], [f0.copy()]
    for i in range(nsteps):
        t = i * dt
        v1 = e_full * (c + dt * rhs(c, t))
        v2 = 0.75 * e_half * c + 0.25 * e_back * (v1 + dt * rhs(v1, t + dt))
        c = (e_full * c + 2.0 * e_half * (v2 + dt * rhs(v2, t + 0.5 * dt))) / 3.0
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            times.append((i + 1) * dt)
            hist.append(to_physical(c))
    return np.array(times), hist


# --- closed-form reference ---------------------------------------------------

def taylor_green(n, amplitude=1.0):
    """``A (sin x cos y, -cos x sin y)`` as a divergence-free field."""
    x, y = grid_points(n)
    u = amplitude * np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    return SpectralField.from_physical(u, divergence_free=True)


def taylor_green_exact(n, nu, t, amplitude=1.0):
    return taylor_green(n, amplitude * np.exp(-2.0 * nu * t))


def taylor_green_pressure(n, amplitude=1.0):
    x, y = grid_points(n)
    return 0.25 * amplitude ** 2 * (np.cos(2 * x) + np.cos(2 * y))
