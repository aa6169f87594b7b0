"""Inner loops of the configuration-space operators.

Each kernel exists twice: a vectorised numpy version and an ``@njit`` twin
with the same signature.  The active backend is chosen once at import time
from the ``FENE_KERNELS`` environment variable (``numba`` or ``numpy``);
without it numba is used when importable.  Both namespaces stay reachable as
``NUMPY`` and ``NUMBA`` so tests and the benchmark can compare them.

Array conventions (``X`` is the flattened physical lattice):

* ``g``       -- ``(n_r, n_theta, X)`` cell values of psi/psi_inf
* ``sig``     -- ``(4, X)`` drag entries ``s11, s12, s21, s22``
* ``geo_r``   -- ``(3, n_r - 1, n_theta)`` radial-face flux geometry
* ``geo_a``   -- ``(3, n_r, n_theta)`` angular-face flux geometry

Radial faces pair ``geo_r`` with ``(s11, s12 + s21, s22)``, angular faces
pair ``geo_a`` with ``(s22 - s11, (s12 + s21)/2, (s12 - s21)/2)``.
"""

import os
import types

import numpy as np


# --- numpy ------------------------------------------------------------------

def _np_drag_tendency(g, sig, geo_r, geo_a, inv_mass):
    s11, s12, s21, s22 = sig[0], sig[1], sig[2], sig[3]
    ur = (geo_r[0][:, :, None] * s11
          + geo_r[1][:, :, None] * (s12 + s21)
          + geo_r[2][:, :, None] * s22)
    fr = ur * (0.5 * (g[:-1] + g[1:]))
    ua = (geo_a[0][:, :, None] * (s22 - s11)
          + geo_a[1][:, :, None] * (0.5 * (s12 + s21))
          + geo_a[2][:, :, None] * (0.5 * (s12 - s21)))
    fa = ua * (0.5 * (g + np.roll(g, -1, axis=1)))
    out = np.zeros_like(g)
    out[:-1] -= fr
    out[1:] += fr
    out -= fa
    out += np.roll(fa, 1, axis=1)
    out *= inv_mass[:, None, None]
    return out


def _np_drag_heun(g, sig, geo_r, geo_a, inv_mass, dt):
    k1 = _np_drag_tendency(g, sig, geo_r, geo_a, inv_mass)
    k2 = _np_drag_tendency(g + dt * k1, sig, geo_r, geo_a, inv_mass)
    return g + (0.5 * dt) * (k1 + k2)


def _np_thomas_solve(lower, cprime, inv_den, rhs):
    nr = rhs.shape[0]
    y = np.empty_like(rhs)
    y[0] = rhs[0] * inv_den[:, 0, None]
    for i in range(1, nr):
        y[i] = (rhs[i] - lower[:, i, None] * y[i - 1]) * inv_den[:, i, None]
    for i in range(nr - 2, -1, -1):
        y[i] -= cprime[:, i, None] * y[i + 1]
    return y


def _np_weighted_pow_sum(vals, w, p):
    a = np.abs(vals)
    if p == 2.0:
        return float(np.sum(w[:, None] * (a * a)))
    return float(np.sum(w[:, None] * a ** p))


def _np_dirichlet_form(v, cr, ca):
    dr = v[1:] - v[:-1]
    e = np.einsum("i,imx->x", cr, dr * dr)
    da = np.roll(v, -1, axis=1) - v
    e += np.einsum("i,imx->x", ca, da * da)
    return e


def _np_diffusion_apply(g, cr, ca):
    out = np.zeros_like(g)
    fr = cr[:, None, None] * (g[1:] - g[:-1])
    out[:-1] += fr
    out[1:] -= fr
    fa = ca[:, None, None] * (np.roll(g, -1, axis=1) - g)
    out += fa
    out -= np.roll(fa, 1, axis=1)
    return out


NUMPY = types.SimpleNamespace(
    name="numpy",
    drag_tendency=_np_drag_tendency,
    drag_heun=_np_drag_heun,
    thomas_solve=_np_thomas_solve,
    weighted_pow_sum=_np_weighted_pow_sum,
    dirichlet_form=_np_dirichlet_form,
    diffusion_apply=_np_diffusion_apply,
)


# --- numba ------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def drag_tendency(g, sig, geo_r, geo_a, inv_mass):
        nr, nt, nx = g.shape
        out = np.zeros_like(g)
        for i in range(nr):
            for m in range(nt):
                mp = m + 1 if m + 1 < nt else 0
                a0 = geo_a[0, i, m]
                a1 = geo_a[1, i, m]
                a2 = geo_a[2, i, m]
                for x in range(nx):
                    ua = (a0 * (sig[3, x] - sig[0, x]) + a1 * (0.5 * (sig[1, x] + sig[2, x]))
                          + a2 * (0.5 * (sig[1, x] - sig[2, x])))
                    f = ua * 0.5 * (g[i, m, x] + g[i, mp, x])
                    out[i, m, x] -= f
                    out[i, mp, x] += f
                if i < nr - 1:
                    r0 = geo_r[0, i, m]
                    r1 = geo_r[1, i, m]
                    r2 = geo_r[2, i, m]
                    for x in range(nx):
                        ur = r0 * sig[0, x] + r1 * (sig[1, x] + sig[2, x]) + r2 * sig[3, x]
                        f = ur * 0.5 * (g[i, m, x] + g[i + 1, m, x])
                        out[i, m, x] -= f
                        out[i + 1, m, x] += f
        for i in range(nr):
            s = inv_mass[i]
            for m in range(nt):
                for x in range(nx):
                    out[i, m, x] *= s
        return out

    @njit(cache=True)
    def drag_heun(g, sig, geo_r, geo_a, inv_mass, dt):
        k1 = drag_tendency(g, sig, geo_r, geo_a, inv_mass)
        nr, nt, nx = g.shape
        g1 = np.empty_like(g)
        for i in range(nr):
            for m in range(nt):
                for x in range(nx):
                    g1[i, m, x] = g[i, m, x] + dt * k1[i, m, x]
        k2 = drag_tendency(g1, sig, geo_r, geo_a, inv_mass)
        h = 0.5 * dt
        for i in range(nr):
            for m in range(nt):
                for x in range(nx):
                    g1[i, m, x] = g[i, m, x] + h * (k1[i, m, x] + k2[i, m, x])
        return g1

    @njit(cache=True)
    def thomas_solve(lower, cprime, inv_den, rhs):
        nr, nq, nx = rhs.shape
        y = np.empty_like(rhs)
        for q in range(nq):
            for x in range(nx):
                y[0, q, x] = rhs[0, q, x] * inv_den[q, 0]
            for i in range(1, nr):
                li = lower[q, i]
                di = inv_den[q, i]
                for x in range(nx):
                    y[i, q, x] = (rhs[i, q, x] - li * y[i - 1, q, x]) * di
            for i in range(nr - 2, -1, -1):
                ci = cprime[q, i]
                for x in range(nx):
                    y[i, q, x] -= ci * y[i + 1, q, x]
        return y

    @njit(cache=True)
    def _pow_sum(vals, w, p):
        total = 0.0
        nc, nx = vals.shape
        m = int(p)
        # small integer powers by repeated products; libm pow is scalar here
        small_int = m == p and 1 <= m <= 8
        for c in range(nc):
            acc = 0.0
            if p == 2.0:
                for x in range(nx):
                    acc += vals[c, x] * vals[c, x]
            elif small_int:
                for x in range(nx):
                    a = abs(vals[c, x])
                    v = a
                    for _ in range(m - 1):
                        v *= a
                    acc += v
            else:
                for x in range(nx):
                    acc += abs(vals[c, x]) ** p
            total += w[c] * acc
        return total

    def weighted_pow_sum(vals, w, p):
        return float(_pow_sum(np.ascontiguousarray(vals), w, float(p)))

    @njit(cache=True)
    def dirichlet_form(v, cr, ca):
        nr, nt, nx = v.shape
        e = np.zeros(nx)
        for i in range(nr):
            for m in range(nt):
                mp = m + 1 if m + 1 < nt else 0
                c = ca[i]
                for x in range(nx):
                    d = v[i, mp, x] - v[i, m, x]
                    e[x] += c * d * d
                if i < nr - 1:
                    c = cr[i]
                    for x in range(nx):
                        d = v[i + 1, m, x] - v[i, m, x]
                        e[x] += c * d * d
        return e

    @njit(cache=True)
    def diffusion_apply(g, cr, ca):
        nr, nt, nx = g.shape
        out = np.zeros_like(g)
        for i in range(nr):
            for m in range(nt):
                mp = m + 1 if m + 1 < nt else 0
                c = ca[i]
                for x in range(nx):
                    f = c * (g[i, mp, x] - g[i, m, x])
                    out[i, m, x] += f
                    out[i, mp, x] -= f
                if i < nr - 1:
                    c = cr[i]
                    for x in range(nx):
                        f = c * (g[i + 1, m, x] - g[i, m, x])
                        out[i, m, x] += f
                        out[i + 1, m, x] -= f
        return out

    return types.SimpleNamespace(
        name="numba",
        drag_tendency=drag_tendency,
        drag_heun=drag_heun,
        thomas_solve=thomas_solve,
        weighted_pow_sum=weighted_pow_sum,
        dirichlet_form=dirichlet_form,
        diffusion_apply=diffusion_apply,
    )


try:
    NUMBA = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA = None


def _select():
    choice = os.environ.get("FENE_KERNELS", "").strip().lower()
    if choice == "numpy" or NUMBA is None:
        return NUMPY
    if choice not in ("", "numba"):
        raise ValueError(f"FENE_KERNELS must be 'numba' or 'numpy', got {choice!r}")
    return NUMBA


active = _select()
