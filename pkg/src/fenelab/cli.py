"""Command-line harness: ``fenelab <command> [--config FILE] [--key value ...]``.

Exit status: 0 on success, 1 when an acceptance flag fails or a run aborts,
2 on usage or configuration errors.
"""

import argparse
import json
import math
import os
import re
import sys
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._alloc import tune_allocator
from .config_space import PolymerParams
from .coupled import SolverConfig, State, continuous_dependence, equilibrium_state, picard_run, run, step
from .errors import AbortedRun, InvalidArgument
from .experiments import (
    check_lemmas, data_ball_norm, gen_besov_data, perturbed_data, smoothing_comparison,
    viscosity_sweep,
)
from .fluid import l2_distance, taylor_green, taylor_green_exact
from .io import export_velocity_csv, save_distribution, save_velocity
from .lp_besov import BesovParams, besov_norm

DEFAULT_NU_LIST = [2.0 ** -m for m in range(4, 11)]


class ConfigError(Exception):
    """Configuration problem; ``line`` is 1-based or ``None``."""

    def __init__(self, message, source="<config>", line=None):
        loc = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(loc + message)
        self.line = line


@dataclass
class RunConfig:
    n: int = 64
    n_r: int = 16
    n_theta: int = 8
    dt: float = 0.005
    t_end: float = 0.5
    k: float = 2.0
    epsilon: float = 0.5
    re: float = 50.0
    drag: str = "corot"
    s: float = 3.0
    p: float = 2.0
    r: float = 2.0
    seed: int = 7
    nu_list: list = field(default_factory=lambda: list(DEFAULT_NU_LIST))
    K: float = 1.0
    stride: int = 10
    splitting: str = "lie"
    n_iters: int = 11
    n_samples: int = 100

    @property
    def nu(self):
        return 0.0 if math.isinf(self.re) else self.epsilon / self.re

    def set_nu(self, nu):
        self.re = math.inf if nu == 0 else self.epsilon / nu

    def to_json(self):
        d = asdict(self)
        if math.isinf(self.re):
            d["re"] = None
        return json.dumps(d, indent=2, sort_keys=True)

    def polymer(self):
        return PolymerParams(k=self.k, epsilon=self.epsilon, re=self.re, drag=self.drag)

    def besov(self):
        return BesovParams(self.s, self.p, self.r)

    def solver(self):
        return SolverConfig(self.n, self.n_r, self.n_theta, self.dt, self.t_end, self.polymer(),
                            self.besov(), self.stride, self.splitting)


_INT_KEYS = {"n", "n_r", "n_theta", "seed", "stride", "n_iters", "n_samples"}
_STR_KEYS = {"drag", "splitting"}


def _coerce(key, value):
    if key == "re" and value is None:
        return math.inf
    if key == "nu_list":
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)) or not value:
            raise ValueError("must be a non-empty list of numbers")
        return [float(v) for v in value]
    if key in _INT_KEYS:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError("must be an integer")
        return int(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ValueError("must be a string")
        return value
    if isinstance(value, bool):
        raise ValueError("must be a number")
    return float(value)


def _key_line(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_config(text, source="<config>", base=None):
    """Parse flat JSON onto ``base`` (defaults when omitted)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(err.msg, source, err.lineno) from err
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", source, 1)
    cfg = base or RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        line = _key_line(text, key)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", source, line)
        try:
            setattr(cfg, key, _coerce(key, value))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"{key}: {err}", source, line) from err
    validate(cfg, source, text)
    return cfg


def validate(cfg, source="<config>", text=""):
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", source, _key_line(text, key) if text else None)

    if cfg.n < 16 or cfg.n & (cfg.n - 1):
        fail("n", "must be a power of two >= 16")
    if cfg.n_r < 8:
        fail("n_r", "must be >= 8")
    if cfg.n_theta < 8 or cfg.n_theta % 2:
        fail("n_theta", "must be an even integer >= 8")
    if not cfg.dt > 0:
        fail("dt", "must be positive")
    if not cfg.t_end > 0:
        fail("t_end", "must be positive")
    if cfg.drag not in ("full", "corot"):
        fail("drag", "must be 'full' or 'corot'")
    if cfg.splitting not in ("lie", "strang"):
        fail("splitting", "must be 'lie' or 'strang'")
    if not 0 < cfg.epsilon < 1:
        fail("epsilon", "must lie in (0, 1)")
    if not cfg.re > 0:
        fail("re", "must be positive")
    if not 0 <= cfg.nu <= 1:
        fail("re", "epsilon/re must lie in [0, 1]")
    if not cfg.k > 0:
        fail("k", "must be positive")
    if not 1 <= cfg.p or not 1 <= cfg.r:
        fail("p", "p and r must be >= 1")
    if any(v < 0 for v in cfg.nu_list):
        fail("nu_list", "entries must be non-negative")
    return cfg


def _add_config_flags(p):
    p.add_argument("--config", help="flat JSON configuration file")
    p.add_argument("--out", help="output directory (default: $FENE_OUT or .)")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        names = [flag] if flag == "--" + f.name else [flag, "--" + f.name]
        p.add_argument(*names, dest=f.name, default=None, help=f"override config key {f.name}")
    p.add_argument("--nu", type=float, default=None, help="viscosity; sets re = epsilon/nu")


def build_parser():
    parser = argparse.ArgumentParser(prog="fenelab", description="FENE vanishing-viscosity laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "integrate one coupled solution from generated data",
        "sweep": "viscosity sweep and rate fit",
        "picard": "linearised iteration and its contraction",
        "depend": "continuous dependence over nu_list",
        "smooth": "Bona-Smith smoothing comparison",
        "check-lemmas": "randomised inequality checks",
        "taylor-green": "coupled run against the exact Taylor-Green solution",
        "gen-data": "write Besov-prescribed initial data",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        _add_config_flags(p)
    return parser


def resolve(args):
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(str(err), args.config) from err
        cfg = parse_config(text, args.config, cfg)
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        try:
            value = raw if f.name == "nu_list" else json.loads(raw) if raw not in ("inf", "null") else None
        except json.JSONDecodeError:
            value = raw
        try:
            setattr(cfg, f.name, _coerce(f.name, value))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"--{f.name.replace('_', '-')}: {err}", "<command line>") from err
    if args.nu is not None:
        if not 0 <= args.nu <= 1:
            raise ConfigError("--nu must lie in [0, 1]", "<command line>")
        cfg.set_nu(args.nu)
    return validate(cfg, "<resolved>")


def _out_dir(args):
    out = args.out or os.environ.get("FENE_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and math.isinf(x):
        return None
    raise TypeError(f"not serialisable: {type(x)}")


def _data(cfg):
    return gen_besov_data(cfg.s, cfg.p, cfg.r, cfg.K, cfg.seed, n=cfg.n, n_r=cfg.n_r,
                          n_theta=cfg.n_theta, k=cfg.k)


def _resolved(cfg):
    d = json.loads(cfg.to_json())
    d["nu"] = cfg.nu
    return d


# --- commands ---------------------------------------------------------------

def cmd_taylor_green(cfg, out):
    scfg = cfg.solver()
    scfg.params = PolymerParams(k=cfg.k, epsilon=cfg.epsilon, re=cfg.re, drag="corot")
    st = equilibrium_state(scfg, taylor_green(cfg.n))
    errors = [0.0]
    t0 = time.perf_counter()
    state = st
    for _ in range(scfg.nsteps):
        state = step(state, scfg)
        errors.append(l2_distance(state.u, taylor_green_exact(cfg.n, cfg.nu, state.t)))
    wall = time.perf_counter() - t0
    max_err = max(errors)
    ok = max_err < 1e-5
    _write_json(os.path.join(out, "taylor_green.json"),
                {"config": _resolved(cfg), "max_l2_error": max_err, "wall_time": wall, "pass": ok})
    print(f"max L2 error {max_err:.3e} (nu={cfg.nu:g}, {scfg.nsteps} steps, {wall:.1f}s)")
    return 0 if ok else 1


def cmd_gen_data(cfg, out):
    u0, psi0 = _data(cfg)
    save_velocity(os.path.join(out, "u0.vel"), u0)
    save_distribution(os.path.join(out, "psi0.psi"), psi0)
    export_velocity_csv(os.path.join(out, "u0.csv"), u0)
    bp = cfg.besov()
    info = {"config": _resolved(cfg), "besov_u": besov_norm(u0, bp),
            "ball_norm": data_ball_norm(u0, psi0, bp), "min_g": float(psi0.g.min())}
    _write_json(os.path.join(out, "data.json"), info)
    print(f"||u0||_B = {info['besov_u']:.6g}, ball norm {info['ball_norm']:.6g} (K = {cfg.K:g})")
    return 0


def cmd_run(cfg, out):
    u0, psi0 = _data(cfg)
    scfg = cfg.solver()
    ckp = os.path.join(out, "final.ckp")
    try:
        traj = run(u0, psi0, scfg, checkpoint=ckp)
        status = 0
    except AbortedRun as err:
        traj = err.trajectory
        status = 1
        print(f"aborted: {err}", file=sys.stderr)
    report = {"config": _resolved(cfg), "completed": traj.completed, "wall_time": traj.wall_time,
              "diagnostics": traj.diagnostics}
    _write_json(os.path.join(out, "run_report.json"), report)
    export_velocity_csv(os.path.join(out, "u_final.csv"), traj.final_u)
    d = traj.diagnostics
    print(f"t={d['t'][-1]:.4g} |u|_B={d['besov_u'][-1]:.6g} mass drift="
          f"{max(d['mass']) - min(d['mass']):.2e}")
    return status


def cmd_sweep(cfg, out):
    data = _data(cfg)
    rep = viscosity_sweep(data, cfg.solver(), sorted(cfg.nu_list, reverse=True))
    rep.config = _resolved(cfg)
    rep.to_json(os.path.join(out, "rate_report.json"))
    rep.to_csv(os.path.join(out, "rate_report.csv"))
    rep.write_curves(os.path.join(out, "curves"))
    print(f"{rep.regime}: slope_u={rep.slope_u:.3f} (pred {rep.predicted_u:g}, R2 {rep.r2_u:.4f}) "
          f"slope_psi={rep.slope_psi:.3f} (pred {rep.predicted_psi:g}, R2 {rep.r2_psi:.4f}) "
          f"pass={rep.passed}")
    return 0 if rep.passed else 1


def picard_contracts(a, lo=3, hi=8, factor=0.9):
    return all(a[n + 1] <= factor * max(a[n], a[n - 1]) for n in range(lo, min(hi, len(a) - 2) + 1))


def cmd_picard(cfg, out):
    u0, psi0 = _data(cfg)
    scfg = cfg.solver()
    res = picard_run(u0, psi0, scfg, cfg.n_iters)
    direct = State(u0, psi0)
    for _ in range(scfg.nsteps):
        direct = step(direct, scfg)
    gap = l2_distance(direct.u, res.u_final)
    ok = picard_contracts(res.a) and gap < 1e-6
    _write_json(os.path.join(out, "picard_report.json"),
                {"config": _resolved(cfg), "A": res.a, "B": res.b, "l2_vs_direct": gap, "pass": ok})
    print("A_n: " + " ".join(f"{a:.3e}" for a in res.a))
    print(f"iterate vs direct solver: {gap:.3e}; contraction pass={ok}")
    return 0 if ok else 1


def _perturbed(cfg, delta):
    data = _data(cfg)
    return data, perturbed_data(data, cfg.s, cfg.p, cfg.r, cfg.seed + 1, delta)


def cmd_depend(cfg, out, delta=1e-3):
    pair1, pair2 = _perturbed(cfg, delta)
    rows = [continuous_dependence(pair1, pair2, cfg.solver(), nu) for nu in cfg.nu_list]
    ratios = [r["ratio"] for r in rows]
    spread = max(ratios) / min(ratios)
    sups = [r["sup_besov_u"] for r in rows]
    sup_spread = max(sups) / min(sups)
    ok = spread < 3.0 and sup_spread < 2.0
    _write_json(os.path.join(out, "dependence_report.json"),
                {"config": _resolved(cfg), "delta": delta, "rows": rows, "spread": spread,
                 "sup_spread": sup_spread, "pass": ok})
    for r in rows:
        print(f"nu={r['nu']:.4g}: input {r['input']:.3e} output {r['output']:.3e} ratio {r['ratio']:.3f}")
    print(f"ratio spread {spread:.3f}; sup B^s spread {sup_spread:.4f}; pass={ok}")
    return 0 if ok else 1


def cmd_smooth(cfg, out):
    data = _data(cfg)
    j_max = int(np.log2(cfg.n)) - 1
    rows = smoothing_comparison(data, cfg.solver(), list(range(1, j_max + 2)))
    dist = [r["solution_distance"] for r in rows]
    ok = all(b <= a for a, b in zip(dist, dist[1:])) and dist[-1] == 0.0
    _write_json(os.path.join(out, "smoothing_report.json"), {"config": _resolved(cfg), "rows": rows, "pass": ok})
    for r in rows:
        print(f"N={r['N']}: data {r['data_distance']:.3e} solution {r['solution_distance']:.3e}")
    return 0 if ok else 1


def cmd_check_lemmas(cfg, out):
    rep = check_lemmas(seed=cfg.seed, n_samples=cfg.n_samples)
    rep["config"] = _resolved(cfg)
    _write_json(os.path.join(out, "lemma_report.json"), rep)
    for name, v in rep["lemmas"].items():
        ratios = ", ".join(f"{x['level']}: {x['max_ratio']:.4g}" for x in v["levels"])
        print(f"{name}: max ratio {ratios}; growth {v['growth']:+.2%}")
    return 0 if rep["passed"] else 1


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "picard": cmd_picard,
    "depend": cmd_depend,
    "smooth": cmd_smooth,
    "check-lemmas": cmd_check_lemmas,
    "taylor-green": cmd_taylor_green,
    "gen-data": cmd_gen_data,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    tune_allocator()
    out = _out_dir(args)
    try:
        return COMMANDS[args.command](cfg, out)
    except InvalidArgument as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
