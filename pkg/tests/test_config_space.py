import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fenelab.config_space import (
    Distribution, PolymerParams, build_config_grid, continuous_z, radial_moment, stress,
    stress_field, weighted_lp_norm, z_functional, z_integral,
)
from fenelab.errors import HypothesisViolation, InvalidArgument
from fenelab.lp_besov import distribution_block_norms, field_block_norms


def smooth_g(grid, coeffs):
    R1, R2 = grid.cartesian()
    a, b, c, d = coeffs
    return 1.0 + a * R1 + b * R2 ** 2 + c * R1 * R2 + d * (R1 ** 2 - R2 ** 2) ** 2


# --- parameters ---------------------------------------------------------------------

def test_params_viscosity_and_coupling():
    par = PolymerParams(k=2.0, epsilon=0.25, re=2.0)
    assert par.nu == 0.125 and par.stress_coupling == 0.375
    assert PolymerParams.with_nu(0.0).nu == 0.0
    assert PolymerParams.with_nu(0.0).stress_coupling == 0.0
    assert PolymerParams.with_nu(0.3, epsilon=0.6).nu == pytest.approx(0.3)


@pytest.mark.parametrize("kwargs", [
    {"k": 0.0}, {"epsilon": 0.0}, {"epsilon": 1.0}, {"re": -1.0}, {"drag": "tumble"},
    {"epsilon": 0.9, "re": 0.5},
])
def test_params_rejected(kwargs):
    with pytest.raises(InvalidArgument):
        PolymerParams(**kwargs)


def test_rate_hypothesis():
    assert PolymerParams(k=2.0).satisfies_rate_hypothesis(2.0)
    assert not PolymerParams(k=1.0).satisfies_rate_hypothesis(2.0)


# --- grid ----------------------------------------------------------------------------

@pytest.mark.parametrize("args", [(4, 8, 2.0), (16, 7, 2.0), (16, 8, 0.0), (8.5, 8, 1.0)])
def test_grid_rejects_bad_arguments(args):
    with pytest.raises(InvalidArgument):
        build_config_grid(*args)


@pytest.mark.parametrize("k", [1.0, 2.0, 3.5])
def test_grid_basic_properties(k):
    grid = build_config_grid(16, 8, k)
    assert abs(grid.n_theta * grid.mass.sum() - 1.0) <= 1e-12
    assert np.all(grid.weights > 0) and np.all(grid.mass > 0)
    assert np.all(grid.r > 0) and np.all(grid.r < 1)


@pytest.mark.parametrize("n_r", [8, 16, 64])
def test_discrete_partition_function(n_r):
    grid = build_config_grid(n_r, 16, 1.0)
    assert abs(grid.z - np.pi / 2) <= 1e-12
    assert abs(1.0 / grid.z - 2.0 / np.pi) <= 1e-12
    assert continuous_z(1.0) == pytest.approx(np.pi / 2)


def test_radial_moment_closed_forms():
    assert radial_moment(1, 1.0, 0.0, 1.0) == pytest.approx(0.25, rel=1e-14)
    assert radial_moment(3, 1.0, 0.0, 1.0) == pytest.approx(1 / 12, rel=1e-14)
    edges = np.linspace(0, 1, 9)
    parts = radial_moment(2, 1.5, edges[:-1], edges[1:])
    assert parts.sum() == pytest.approx(radial_moment(2, 1.5, 0.0, 1.0), rel=1e-13)


# --- weighted norms --------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0, 3.0, np.inf])
def test_weighted_norm_of_equilibrium(p, grid8):
    assert weighted_lp_norm(np.ones((8, 8)), grid8, p) == pytest.approx(1.0, rel=1e-13)
    assert weighted_lp_norm(np.zeros((8, 8)), grid8, p) == 0.0


def test_weighted_norm_linear_perturbation_converges():
    target = np.sqrt(1.0 + 1.0 / 6.0)
    errs = []
    for n_r in (16, 32, 64):
        grid = build_config_grid(n_r, 4 * n_r // 2, 1.0)
        R1, _ = grid.cartesian()
        errs.append(abs(weighted_lp_norm(1.0 + R1, grid, 2.0) - target))
    assert errs[-1] <= 1e-4
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


# --- stress --------------------------------------------------------------------------

def test_equilibrium_stress_is_isotropic():
    for n_r in (16, 64):
        grid = build_config_grid(n_r, 16, 2.0)
        par = PolymerParams(k=2.0, epsilon=0.3)
        tau = stress(np.ones((n_r, 16)), grid, par)
        assert np.allclose(tau, 0.3 * np.eye(2), atol=1e-13)
        assert np.all(stress(np.zeros((n_r, 16)), grid, par) == 0.0)


def test_off_diagonal_stress_oracle():
    # tau_12 for g = c R1 R2 at k = 2 is epsilon c / 8
    grid = build_config_grid(64, 64, 2.0)
    R1, R2 = grid.cartesian()
    par = PolymerParams(k=2.0, epsilon=0.5)
    tau = stress(0.7 * R1 * R2, grid, par)
    assert tau[0, 1] == tau[1, 0]
    assert tau[0, 1] == pytest.approx(0.5 * 0.7 / 8, rel=2e-3)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10 ** 6))
def test_stress_linear(a, b, seed, grid8):
    rng = np.random.default_rng(seed)
    g1, g2 = rng.standard_normal((2, 8, 8, 3))
    par = PolymerParams()
    lhs = stress(a * g1 + b * g2, grid8, par)
    rhs = a * stress(g1, grid8, par) + b * stress(g2, grid8, par)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_stress_field_matches_pointwise(grid8):
    rng = np.random.default_rng(4)
    psi = Distribution(grid8, 1 + 0.2 * rng.standard_normal((8, 8, 16, 16)))
    par = PolymerParams()
    tau = stress(psi.g, grid8, par)
    field = stress_field(psi, par)
    assert np.allclose(field, np.stack([tau[0, 0], tau[0, 1], tau[1, 1]]), atol=1e-14)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_block_stress_bounded_by_block_distribution(p, grid8):
    par = PolymerParams(epsilon=0.5)
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        psi = Distribution(grid8, 1 + 0.3 * rng.standard_normal((8, 8, 32, 32)))
        tau = stress_field(psi, par)
        tb = field_block_norms(np.stack([tau[0], tau[1], tau[1], tau[2]]), p)
        pb = distribution_block_norms(psi, p)
        worst = max(worst, np.max(tb / pb))
    assert np.isfinite(worst) and worst <= 4.0 * par.epsilon


# --- boundary-layer functional --------------------------------------------------------

def test_z_integral_equilibrium_k1():
    errs = []
    for n_r in (16, 32, 64):
        grid = build_config_grid(n_r, 16, 1.0)
        errs.append(abs(z_integral(np.ones((n_r, 16)), grid) - 10.0 / 3.0))
    assert max(errs) <= 1e-12


def test_z_functional_hypothesis_guard():
    grid = build_config_grid(16, 8, 1.0)
    with pytest.raises(HypothesisViolation):
        z_functional(np.ones((16, 8)), grid, 2.0)


def test_z_functional_values():
    grid = build_config_grid(32, 16, 2.0)
    lhs, rhs = z_functional(np.zeros((32, 16)), grid, 2.0)
    assert lhs == 0.0 and rhs == 0.0
    lhs, rhs = z_functional(np.ones((32, 16)), grid, 2.0)
    assert rhs == pytest.approx(1.0, rel=1e-13) and np.isfinite(lhs)


@settings(max_examples=20, deadline=None)
@given(coeffs=st.tuples(*[st.floats(-0.4, 0.4)] * 4))
def test_z_functional_stable_under_refinement(coeffs):
    ratios = []
    for n_r in (32, 64):
        grid = build_config_grid(n_r, 32, 2.0)
        lhs, rhs = z_functional(smooth_g(grid, coeffs), grid, 2.0)
        ratios.append(lhs / rhs)
    assert np.all(np.isfinite(ratios))
    assert abs(ratios[1] / ratios[0] - 1.0) < 0.05


# --- distribution container --------------------------------------------------------------

def test_distribution_shape_checks(grid8):
    with pytest.raises(InvalidArgument):
        Distribution(grid8, np.ones((8, 4, 16, 16)))
    a = Distribution.equilibrium(grid8, 16)
    with pytest.raises(InvalidArgument):
        a.check_compatible(Distribution.equilibrium(grid8, 32))
    other = build_config_grid(16, 8, 2.0)
    with pytest.raises(InvalidArgument):
        a.check_compatible(Distribution.equilibrium(other, 16))


def test_distribution_mass(grid8):
    rho = 1.0 + 0.5 * np.sin(np.arange(16))[:, None] * np.ones(16)
    psi = Distribution.equilibrium(grid8, 16, rho)
    assert np.allclose(psi.mass_density(), rho, atol=1e-14)
    assert psi.total_mass() == pytest.approx((2 * np.pi / 16) ** 2 * rho.sum(), rel=1e-13)
    assert psi.values().shape == psi.g.shape
