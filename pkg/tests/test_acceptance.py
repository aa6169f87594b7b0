"""End-to-end acceptance criteria.

Each test records one pass/fail line through the ``criterion`` fixture; the
lines are printed together at the end of the session.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from fenelab.cli import main, picard_contracts
from fenelab.config_space import PolymerParams, build_config_grid, continuous_z, stress, weighted_lp_norm
from fenelab.coupled import SolverConfig, equilibrium_state, run
from fenelab.experiments import gen_besov_data, boundary_layer_equilibrium
from fenelab.fluid import energy, max_divergence, ns_step
from fenelab.lp_besov import BesovParams, SpectralField, besov_norm, build_partition, lp_block, phi
from fenelab.spectral import grid_points

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _report(path):
    return json.loads(Path(path).read_text())


# --- 1 --------------------------------------------------------------------------------

def test_c01_taylor_green_exactness(tmp_path, criterion):
    rows = []
    for nu in (0.0, 0.01, 0.1):
        out = tmp_path / f"nu{nu:g}"
        code = main(["taylor-green", "--config", str(CONFIGS / "taylor_green.json"),
                     "--nu", repr(nu), "--out", str(out)])
        rep = _report(out / "taylor_green.json")
        rows.append((nu, code, rep["max_l2_error"], rep["wall_time"]))
    ok = all(code == 0 and err < 1e-5 and wall < 120.0 for _, code, err, wall in rows)
    criterion(1, ok, "; ".join(f"nu={nu:g} err={err:.1e} {wall:.0f}s" for nu, _, err, wall in rows))
    assert ok


# --- 2 --------------------------------------------------------------------------------

def test_c02_trivial_solution_fixed_point(criterion):
    cfg = SolverConfig(n=16, n_r=8, n_theta=8, dt=0.01, t_end=10.0, params=PolymerParams.with_nu(0.05),
                       stride=1000)
    st = equilibrium_state(cfg)
    traj = run(st.u, st.psi, cfg, keep_psi=True)
    assert traj.completed and len(traj.times) == 2
    drift = {k: abs(v[-1] - v[0]) for k, v in traj.diagnostics.items() if k != "t"}
    drift["u"] = float(np.max(np.abs(traj.u[-1].coef)))
    drift["g"] = float(np.max(np.abs(traj.psi[-1].g - traj.psi[0].g)))
    worst = max(drift, key=drift.get)
    ok = drift[worst] < 1e-10
    criterion(2, ok, f"1000 steps, worst drift {drift[worst]:.1e} ({worst})")
    assert ok


# --- 3 --------------------------------------------------------------------------------

def test_c03_conservation(criterion):
    u0, psi0 = gen_besov_data(3.0, 2.0, 2.0, 1.0, 7, n=64, n_r=16, n_theta=8)
    cfg = SolverConfig(n=64, n_r=16, n_theta=8, dt=0.005, t_end=0.5, params=PolymerParams.with_nu(2.0 ** -4),
                       stride=10)
    divs = []
    m0 = psi0.total_mass()
    masses = []

    def watch(state):
        divs.append(max_divergence(state.u))
        masses.append(state.psi.total_mass())

    run(u0, psi0, cfg, on_step=watch)
    mass_drift = max(abs(m - m0) for m in masses) / m0
    max_div = max(divs)

    # Euler with the polymer forcing switched off
    par = PolymerParams.with_nu(0.0)
    u = u0
    e0 = energy(u)
    for _ in range(200):
        u = ns_step(u, None, 0.005, par)
    e_drift = abs(energy(u) - e0) / e0

    ok = mass_drift < 1e-9 and max_div <= 1e-12 and len(divs) == cfg.nsteps and e_drift < 1e-7
    criterion(3, ok, f"mass {mass_drift:.1e}, max div {max_div:.1e} over {len(divs)} steps, "
                     f"Euler energy {e_drift:.1e}")
    assert ok


# --- 4 --------------------------------------------------------------------------------

def _order(errs):
    errs = np.asarray(errs)
    if np.all(errs <= 1e-12):
        # exact up to round-off at every level
        return np.inf
    return float(np.min(np.log2(errs[:-1] / errs[1:])))


def test_c04_quadrature_oracles(criterion):
    levels = (16, 32, 64)
    z_err, tau_err, l33_err = [], [], []
    for n_r in levels:
        errs_z, errs_tau = [], []
        for k in (1.0, 2.0, 3.5):
            grid = build_config_grid(n_r, 16, k)
            errs_z.append(abs(grid.z - continuous_z(k)) / continuous_z(k))
            tau = stress(np.ones((n_r, 16)), grid, PolymerParams(k=k, epsilon=0.3))
            errs_tau.append(np.max(np.abs(tau - 0.3 * np.eye(2))) / 0.3)
        z_err.append(max(errs_z))
        tau_err.append(max(errs_tau))
        l33_err.append(abs(boundary_layer_equilibrium(n_r=n_r, k=1.0, p=2.0) / (10.0 / 3.0) ** 2 - 1.0))

    # non-constant integrands, where the cell quadrature is not exact
    target = np.sqrt(1.0 + 1.0 / 6.0)
    norm_err, shear_err = [], []
    for n_r in levels:
        grid = build_config_grid(n_r, n_r, 1.0)
        r1, _ = grid.cartesian()
        norm_err.append(abs(weighted_lp_norm(1.0 + r1, grid, 2.0) - target))
        grid = build_config_grid(n_r, n_r, 2.0)
        r1, r2 = grid.cartesian()
        tau12 = stress(0.7 * r1 * r2, grid, PolymerParams(k=2.0, epsilon=0.5))[0, 1]
        shear_err.append(abs(tau12 / (0.5 * 0.7 / 8) - 1.0))

    at64 = max(z_err[-1], tau_err[-1], l33_err[-1])
    orders = [_order(e) for e in (z_err, tau_err, l33_err, norm_err, shear_err)]
    ok = at64 < 1e-4 and min(orders) >= 1.95
    criterion(4, ok, f"N_r=64 rel err Z {z_err[-1]:.1e} tau {tau_err[-1]:.1e} (10/3)^2 {l33_err[-1]:.1e}; "
                     f"orders {', '.join('exact' if np.isinf(o) else f'{o:.2f}' for o in orders)}")
    assert ok


# --- 5 and 6 ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    out = {}
    for name in ("smooth", "rough"):
        d = tmp_path_factory.mktemp(f"sweep_{name}")
        t0 = time.perf_counter()
        code = main(["sweep", "--config", str(CONFIGS / f"sweep_{name}.json"), "--out", str(d)])
        wall = time.perf_counter() - t0
        out[name] = (code, _report(d / "rate_report.json"), wall)
    return out


def test_c05_rate_smooth(sweeps, criterion):
    code, rep, wall = sweeps["smooth"]
    ok = (code == 0 and rep["passed"] and rep["slope_u"] >= 0.85 and rep["slope_psi"] >= 0.35
          and rep["r2_u"] >= 0.98 and rep["r2_psi"] >= 0.98 and wall < 1800.0)
    criterion(5, ok, f"slope_u {rep['slope_u']:.3f} (R2 {rep['r2_u']:.4f}), slope_psi {rep['slope_psi']:.3f} "
                     f"(R2 {rep['r2_psi']:.4f}), {wall:.0f}s")
    assert ok


def test_c06_rate_rough(sweeps, criterion):
    _, smooth, _ = sweeps["smooth"]
    code, rep, wall = sweeps["rough"]
    gap = smooth["slope_u"] - rep["slope_u"]
    ok = code == 0 and rep["slope_u"] >= 0.75 and rep["slope_psi"] >= 0.25 and gap >= 0.05
    criterion(6, ok, f"s=1.8: slope_u {rep['slope_u']:.3f}, slope_psi {rep['slope_psi']:.3f}, "
                     f"gap to smooth {gap:.3f}, {wall:.0f}s")
    assert ok


# --- 7 --------------------------------------------------------------------------------

def test_c07_littlewood_paley_suite(criterion):
    tol = 1e-10
    worst = {}
    rng = np.random.default_rng(2024)
    for n in (32, 64, 128):
        part = build_partition(n)
        worst["unity"] = max(worst.get("unity", 0.0), float(np.max(np.abs(part.blocks.sum(axis=0) - 1.0))))
        overlap = max(float(np.max(np.abs(part.blocks[a] * part.blocks[b])))
                      for a in range(part.n_blocks) for b in range(a + 2, part.n_blocks))
        worst["orthogonality"] = max(worst.get("orthogonality", 0.0), overlap)
        f = SpectralField.from_physical(rng.standard_normal((2, n, n)))
        total = sum(lp_block(f, j).physical() for j in part.indices)
        ref = f.physical()
        worst["reconstruction"] = max(worst.get("reconstruction", 0.0),
                                      float(np.max(np.abs(total - ref)) / np.max(np.abs(ref))))
        # phi_j(xi) = phi(2^-j xi) on the lattice
        xi = np.hypot(*np.meshgrid(np.fft.fftfreq(n, 1.0 / n), np.fft.fftfreq(n, 1.0 / n), indexing="ij"))
        dil = max(float(np.max(np.abs(part.multiplier(j) - phi(xi / 2.0 ** j)))) for j in range(0, part.j_max + 1))
        worst["dilation"] = max(worst.get("dilation", 0.0), dil)

    x, _ = grid_points(128)
    scaling = []
    for s, r in ((0.5, 2.0), (2.0, 1.0), (3.0, 4.0)):
        ratios = [besov_norm(np.cos(2 ** j * x), BesovParams(s, 2.0, r)) / 2 ** (j * s) for j in (3, 4, 5)]
        scaling.append((max(ratios) - min(ratios)) / max(ratios))
    worst["pure-mode 2^(js)"] = max(scaling)
    bad = {k: v for k, v in worst.items() if not v <= tol}
    ok = not bad
    criterion(7, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# --- 8 --------------------------------------------------------------------------------

def test_c08_picard_contraction(tmp_path, criterion):
    code = main(["picard", "--config", str(CONFIGS / "picard.json"), "--out", str(tmp_path)])
    rep = _report(tmp_path / "picard_report.json")
    a = rep["A"]
    contracts = picard_contracts(a, 3, 8, 0.9)
    ok = code == 0 and contracts and len(a) >= 10 and rep["l2_vs_direct"] < 1e-6 and rep["config"]["t_end"] <= 0.1
    worst = max(a[n + 1] / max(a[n], a[n - 1]) for n in range(3, 9))
    criterion(8, ok, f"worst A_(n+1)/max(A_n, A_(n-1)) {worst:.3f} for 3<=n<=8, L2 vs direct {rep['l2_vs_direct']:.1e}")
    assert ok


# --- 9 --------------------------------------------------------------------------------

def test_c09_uniformity_in_viscosity(tmp_path, criterion):
    code = main(["depend", "--config", str(CONFIGS / "depend.json"), "--out", str(tmp_path)])
    rep = _report(tmp_path / "dependence_report.json")
    nus = [r["nu"] for r in rep["rows"]]
    ok = code == 0 and nus == [0.0, 2.0 ** -6, 2.0 ** -3, 1.0] and rep["sup_spread"] < 2.0 and rep["spread"] < 3.0
    criterion(9, ok, f"sup B^s factor {rep['sup_spread']:.4f}, dependence ratio factor {rep['spread']:.4f}")
    assert ok


# --- 10 -------------------------------------------------------------------------------

def test_c10_inequality_checkers(tmp_path, criterion):
    code = main(["check-lemmas", "--config", str(CONFIGS / "lemmas.json"), "--out", str(tmp_path)])
    rep = _report(tmp_path / "lemma_report.json")
    lemmas = rep["lemmas"]
    ok = (code == 0 and rep["n_samples"] == 100 and set(lemmas) == {"product", "pressure", "boundary_layer", "commutator", "transport_diffusion"}
          and all(v["finite"] and v["growth"] < 0.10 for v in lemmas.values()))
    criterion(10, ok, ", ".join(f"{k} growth {v['growth']:+.1%}" for k, v in sorted(lemmas.items())))
    assert ok
