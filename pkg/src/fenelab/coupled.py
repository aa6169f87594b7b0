"""The coupled Navier-Stokes / Fokker-Planck initial-value problem.

One Lie step is ``tau(psi^n) -> momentum step -> advect psi by u^{n+1} ->
R-step with sigma(u^{n+1})``; the Strang variant halves the fluid and
advection substeps around a full R-step.  The same step, with the
advecting velocity and stress frozen from the previous iterate, drives the
linearised Picard chain.
"""

import time as _time
from dataclasses import asdict, dataclass, field

import numpy as np

from .config_space import Distribution, PolymerParams, build_config_grid, stress_field
from .errors import AbortedRun, InvalidArgument, NumericalBreakdown, StabilityError
from .fluid import energy, l2_distance, max_divergence, ns_step
from .fokker_planck import advect, drag_field, fp_step
from .io import load_checkpoint, save_checkpoint
from .lp_besov import (
    BesovParams, SpectralField, besov_lp_norm, besov_norm, chemin_lerner_from_blocks,
    distribution_block_norms, field_block_norms, low_freq,
)

SPLITTINGS = ("lie", "strang")


@dataclass
class SolverConfig:
    n: int = 64
    n_r: int = 32
    n_theta: int = 16
    dt: float = 1e-3
    t_end: float = 0.5
    params: PolymerParams = field(default_factory=PolymerParams)
    besov: BesovParams = field(default_factory=lambda: BesovParams(3.0, 2.0, 2.0))
    stride: int = 10
    splitting: str = "lie"
    blowup_factor: float = 1e3

    def __post_init__(self):
        if self.splitting not in SPLITTINGS:
            raise InvalidArgument(f"splitting must be one of {SPLITTINGS}")
        if not self.t_end > 0 or not self.dt > 0:
            raise InvalidArgument("t_end and dt must be positive")
        if self.stride < 1:
            raise InvalidArgument("stride must be >= 1")
        _ = self.nsteps

    @property
    def nsteps(self):
        m = int(round(self.t_end / self.dt))
        if m < 1 or abs(m * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise InvalidArgument("t_end must be a positive multiple of dt")
        return m

    def grid(self):
        return build_config_grid(self.n_r, self.n_theta, self.params.k)

    def with_nu(self, nu):
        p = self.params
        return SolverConfig(self.n, self.n_r, self.n_theta, self.dt, self.t_end,
                            PolymerParams.with_nu(nu, p.k, p.epsilon, p.drag),
                            self.besov, self.stride, self.splitting, self.blowup_factor)

    def to_dict(self):
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["besov"] = asdict(self.besov)
        return d


@dataclass
class State:
    u: SpectralField
    psi: Distribution
    t: float = 0.0

    def copy(self):
        return State(SpectralField(self.u.coef.copy(), self.u.divergence_free), self.psi.copy(), self.t)


def _annotate(err, t):
    return type(err)(f"t={t:.6g}: {err}")


def step(state, cfg):
    """Advance ``state`` by one splitting step of size ``cfg.dt``."""
    params = cfg.params
    dt = cfg.dt
    try:
        tau = stress_field(state.psi, params)
        if cfg.splitting == "lie":
            u1 = ns_step(state.u, tau, dt, params)
            psi = advect(state.psi, u1, dt)
            psi = fp_step(psi, drag_field(u1, params.drag), dt)
        else:
            h = 0.5 * dt
            uh = ns_step(state.u, tau, h, params)
            psi = advect(state.psi, uh, h)
            psi = fp_step(psi, drag_field(uh, params.drag), dt)
            psi = advect(psi, uh, h)
            u1 = ns_step(uh, stress_field(psi, params), h, params)
    except (StabilityError, NumericalBreakdown) as err:
        raise _annotate(err, state.t) from err
    return State(u1, psi, state.t + dt)


def equilibrium_state(cfg, u=None):
    grid = cfg.grid()
    psi = Distribution.equilibrium(grid, cfg.n)
    if u is None:
        u = SpectralField.zeros(cfg.n)
    return State(u, psi, 0.0)


@dataclass
class Trajectory:
    """Snapshots every ``stride`` steps (and at the end) plus diagnostics."""

    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    completed: bool = False
    wall_time: float = 0.0

    def record(self, state, cfg, keep_psi):
        bp = cfg.besov
        psi = state.psi
        d = {
            "t": state.t,
            "besov_u": besov_norm(state.u, bp),
            "besov_psi": besov_lp_norm(psi, bp.shifted(-1.0)),
            "energy": energy(state.u),
            "mass": psi.total_mass(),
            "max_div": max_divergence(state.u),
            "min_g": float(np.min(psi.g)),
        }
        for k, v in d.items():
            self.diagnostics.setdefault(k, []).append(v)
        self.times.append(state.t)
        self.u.append(state.u)
        if keep_psi:
            self.psi.append(psi)
        return d

    def series(self, key):
        return np.asarray(self.diagnostics[key])

    @property
    def final_u(self):
        return self.u[-1]


def run(u0, psi0, cfg, keep_psi=False, start_time=0.0, checkpoint=None, checkpoint_every=0,
        on_step=None):
    """Integrate from ``(u0, psi0)`` at ``start_time`` to ``cfg.t_end``.

    Snapshots are kept every ``cfg.stride`` steps.  A run whose velocity norm
    exceeds ``blowup_factor`` times its initial value, or whose step fails,
    raises :class:`AbortedRun` carrying the partial trajectory.  With
    ``checkpoint`` set, the state is written there every ``checkpoint_every``
    steps and at the end.
    """
    if u0.n != cfg.n or psi0.n != cfg.n:
        raise InvalidArgument("initial data do not match the configured lattice")
    wall = _time.perf_counter()
    traj = Trajectory()
    state = State(u0, psi0, float(start_time))
    first = traj.record(state, cfg, keep_psi)
    ref_u = max(first["besov_u"], 1e-12)
    ref_psi = max(first["besov_psi"], 1e-12)
    done = int(round(start_time / cfg.dt))
    total = cfg.nsteps
    manifest = {"config": cfg.to_dict()}
    for i in range(done, total):
        try:
            state = step(state, cfg)
        except (StabilityError, NumericalBreakdown) as err:
            traj.wall_time = _time.perf_counter() - wall
            raise AbortedRun(str(err), traj) from err
        if on_step is not None:
            on_step(state)
        last = i + 1 == total
        if (i + 1) % cfg.stride == 0 or last:
            d = traj.record(state, cfg, keep_psi)
            if not (np.isfinite(d["besov_u"]) and d["besov_u"] <= cfg.blowup_factor * ref_u
                    and d["besov_psi"] <= cfg.blowup_factor * ref_psi):
                traj.wall_time = _time.perf_counter() - wall
                raise AbortedRun(f"t={state.t:.6g}: norm exceeded {cfg.blowup_factor:g} x initial", traj)
        if checkpoint and ((checkpoint_every and (i + 1) % checkpoint_every == 0) or last):
            save_checkpoint(checkpoint, state.u, state.psi, state.t, manifest)
    traj.completed = True
    traj.wall_time = _time.perf_counter() - wall
    return traj


def resume(path, cfg, **kwargs):
    """Continue a run from a checkpoint written by :func:`run`."""
    u, psi, t, _ = load_checkpoint(path, cfg.grid())
    return run(u, psi, cfg, start_time=t, **kwargs)


def final_state(u0, psi0, cfg):
    """Integrate without diagnostics; returns the final :class:`State`."""
    state = State(u0, psi0, 0.0)
    for _ in range(cfg.nsteps):
        state = step(state, cfg)
    return state


# --- Picard chain -----------------------------------------------------------

@dataclass
class PicardResult:
    a: np.ndarray            # A_n, n = 0 .. n_iters - 2
    b: np.ndarray            # B_n
    u_final: SpectralField   # last iterate at T
    psi_final: Distribution
    times: np.ndarray


def _lowpass(u0, psi0, j):
    part_max = int(np.log2(u0.n))  # j_max + 1
    j = min(j, part_max)
    return low_freq(u0, j), low_freq(psi0, j)


def picard_run(u0, psi0, cfg, n_iters, psi_stride=None):
    """Linearised iteration: ``u^{n+1}`` is transported by ``u^n`` and forced by
    ``tau(psi^n)``; ``psi^{n+1}`` is transported and stretched by ``u^n``.

    Iterate ``n`` starts from ``S_n`` of the data (iterate 0 is constant in
    time).  Returns the Chemin-Lerner differences ``A_n`` (velocity, in
    ``B^{s-1}``) and ``B_n`` (distribution, in ``B^{s-2}(L^p)``), both with
    the sup in time inside the block sum.
    """
    if n_iters < 2:
        raise InvalidArgument("n_iters must be >= 2")
    params = cfg.params
    bp = cfg.besov
    dt = cfg.dt
    nsteps = cfg.nsteps
    psi_stride = psi_stride or cfg.stride
    times = np.arange(nsteps + 1) * dt

    # iterate 0
    u, psi = _lowpass(u0, psi0, 0)
    u_phys = u.physical()
    prev = {
        "stages": [[u_phys, u_phys, u_phys]] * nsteps,
        "u": [u] * (nsteps + 1),
        "tau": [stress_field(psi, params)] * nsteps,
        "psi": {k: psi for k in range(0, nsteps + 1, psi_stride)},
    }
    prev["psi"][nsteps] = psi
    a_list, b_list = [], []
    for it in range(1, n_iters):
        u, psi = _lowpass(u0, psi0, it)
        cur = {"stages": [], "u": [u], "tau": [], "psi": {0: psi}}
        for k in range(nsteps):
            tau = stress_field(psi, params)
            cur["tau"].append(tau)
            stages = []
            try:
                u = ns_step(u, prev["tau"][k], dt, params, advecting=prev["stages"][k], stages=stages)
                a_next = prev["u"][k + 1]
                psi = advect(psi, a_next, dt)
                psi = fp_step(psi, drag_field(a_next, params.drag), dt)
            except (StabilityError, NumericalBreakdown) as err:
                raise AbortedRun(f"Picard iterate {it}: {_annotate(err, k * dt)}") from err
            cur["stages"].append(stages)
            cur["u"].append(u)
            if (k + 1) % psi_stride == 0 or k + 1 == nsteps:
                cur["psi"][k + 1] = psi
        a_list.append(_velocity_gap(cur["u"], prev["u"], times, bp))
        b_list.append(_distribution_gap(cur["psi"], prev["psi"], dt, bp))
        prev = cur
    return PicardResult(np.array(a_list), np.array(b_list), prev["u"][-1], psi, times)


def _velocity_gap(us, vs, times, bp):
    blocks = np.array([field_block_norms((a - b).physical(), bp.p) for a, b in zip(us, vs)])
    return chemin_lerner_from_blocks(blocks, times, bp.s - 1.0, bp.r, np.inf)


def _distribution_gap(psis, phis, dt, bp):
    keys = sorted(set(psis) & set(phis))
    blocks = []
    for k in keys:
        a, b = psis[k], phis[k]
        blocks.append(distribution_block_norms(Distribution(a.grid, a.g - b.g), bp.p))
    return chemin_lerner_from_blocks(np.array(blocks), np.array(keys) * dt, bp.s - 2.0, bp.r, np.inf)


# --- continuous dependence --------------------------------------------------

def data_distance(pair1, pair2, bp):
    (u0, psi0), (v0, phi0) = pair1, pair2
    du = besov_norm(u0 - v0, bp.shifted(-1.0))
    dpsi = besov_lp_norm(Distribution(psi0.grid, psi0.g - phi0.g), bp.shifted(-2.0))
    return du, dpsi


def continuous_dependence(pair1, pair2, cfg, nu=None):
    """Run both pairs in lockstep and measure their Chemin-Lerner distance.

    Returns a dict with the input distances (``B^{s-1}`` and
    ``B^{s-2}(L^p)``), the output distances with sup in time, their ratio and
    the sup-in-time ``B^s`` norm of the reference velocity.
    """
    if nu is not None:
        cfg = cfg.with_nu(nu)
    bp = cfg.besov
    du0, dpsi0 = data_distance(pair1, pair2, bp)
    s1 = State(pair1[0], pair1[1])
    s2 = State(pair2[0], pair2[1])
    times, ub, pb, ref = [], [], [], []

    def sample():
        times.append(s1.t)
        ref.append(besov_norm(s1.u, bp))
        ub.append(field_block_norms((s1.u - s2.u).physical(), bp.p))
        pb.append(distribution_block_norms(Distribution(s1.psi.grid, s1.psi.g - s2.psi.g), bp.p))

    sample()
    for i in range(cfg.nsteps):
        s1 = step(s1, cfg)
        s2 = step(s2, cfg)
        if (i + 1) % cfg.stride == 0 or i + 1 == cfg.nsteps:
            sample()
    du = chemin_lerner_from_blocks(np.array(ub), times, bp.s - 1.0, bp.r, np.inf)
    dpsi = chemin_lerner_from_blocks(np.array(pb), times, bp.s - 2.0, bp.r, np.inf)
    din = du0 + dpsi0
    dout = du + dpsi
    return {
        "nu": cfg.params.nu,
        "input_u": du0, "input_psi": dpsi0, "input": din,
        "output_u": du, "output_psi": dpsi, "output": dout,
        "ratio": dout / din if din > 0 else 0.0,
        "sup_besov_u": float(max(ref)),
        "l2_final": l2_distance(s1.u, s2.u),
    }
