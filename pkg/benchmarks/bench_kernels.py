"""Time the numpy and numba kernel backends side by side.

Each kernel is called once to trigger compilation, then timed with the best
of ``--repeat`` runs.  The last row times one full Fokker-Planck step with the
backend swapped into the solver.

    python3 benchmarks/bench_kernels.py --n 64 --n-r 16 --n-theta 8
"""
import argparse
import timeit

import numpy as np

from fenelab import _kernels
from fenelab._alloc import tune_allocator
from fenelab.config_space import build_config_grid
from fenelab.fokker_planck import FokkerPlanckSolver


def best_of(fn, repeat, number):
    fn()
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def cases(grid, nx, rng):
    g = rng.uniform(0.1, 2.0, (grid.n_r, grid.n_theta, nx))
    sig = rng.standard_normal((4, nx))
    inv_mass = 1.0 / grid.mass
    solver = FokkerPlanckSolver(grid)
    lower, cprime, inv_den, _ = solver.factors(1e-3)
    rhs = rng.standard_normal(g.shape)
    cells = g.reshape(grid.ncell, nx)
    w = grid.mass_weights().reshape(-1)
    return {
        "drag_tendency": lambda k: k.drag_tendency(g, sig, grid.geo_r, grid.geo_a, inv_mass),
        "drag_heun": lambda k: k.drag_heun(g, sig, grid.geo_r, grid.geo_a, inv_mass, 1e-3),
        "thomas_solve": lambda k: k.thomas_solve(lower, cprime, inv_den, rhs),
        "diffusion_apply": lambda k: k.diffusion_apply(g, grid.diff_radial, grid.diff_angular),
        "weighted_pow_sum": lambda k: k.weighted_pow_sum(cells, w, 3.0),
        "dirichlet_form": lambda k: k.dirichlet_form(g, grid.diff_radial, grid.diff_angular),
    }, g, sig


def full_step(grid, g, sig, kernels):
    solver = FokkerPlanckSolver(grid)
    solver.kernels = kernels
    return lambda: solver.step(g, sig, 1e-3)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="torus lattice size")
    ap.add_argument("--n-r", type=int, default=16)
    ap.add_argument("--n-theta", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=10)
    args = ap.parse_args()

    tune_allocator()
    if _kernels.NUMBA is None:
        raise SystemExit("numba is not importable; nothing to compare")
    grid = build_config_grid(args.n_r, args.n_theta, 2.0)
    table, g, sig = cases(grid, args.n * args.n, np.random.default_rng(0))
    backends = {"numpy": _kernels.NUMPY, "numba": _kernels.NUMBA}

    print(f"lattice {args.n}x{args.n}, configuration grid {args.n_r}x{args.n_theta}")
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    rows = [(name, {b: (lambda f=f, k=k: f(k)) for b, k in backends.items()}) for name, f in table.items()]
    rows.append(("fp_step", {b: full_step(grid, g, sig, k) for b, k in backends.items()}))
    for name, fns in rows:
        t = {b: best_of(fn, args.repeat, args.number) for b, fn in fns.items()}
        print(f"{name:<18}{1e3 * t['numpy']:>12.3f}{1e3 * t['numba']:>12.3f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
