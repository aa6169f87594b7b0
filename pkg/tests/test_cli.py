import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fenelab.cli import ConfigError, RunConfig, main, parse_config, picard_contracts
from fenelab.io import load_distribution, load_velocity
from fenelab.lp_besov import BesovParams, besov_norm

SMALL = ["--n", "32", "--n-r", "8", "--n-theta", "8", "--dt", "0.01", "--t-end", "0.05"]

configs = st.builds(
    RunConfig,
    n=st.sampled_from([16, 32, 64, 128]),
    n_r=st.integers(8, 64),
    n_theta=st.sampled_from([8, 10, 16, 32]),
    dt=st.floats(1e-5, 0.1),
    t_end=st.floats(0.01, 10.0),
    k=st.floats(0.5, 10.0),
    epsilon=st.floats(0.01, 0.99),
    re=st.one_of(st.just(math.inf), st.floats(1.0, 1e6)),
    drag=st.sampled_from(["full", "corot"]),
    s=st.floats(1.6, 5.0),
    p=st.floats(1.0, 8.0),
    r=st.floats(1.0, 8.0),
    seed=st.integers(0, 2 ** 31 - 1),
    nu_list=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=8),
    K=st.floats(0.01, 100.0),
)


@settings(max_examples=100, deadline=None)
@given(cfg=configs)
def test_config_round_trip(cfg):
    once = parse_config(cfg.to_json())
    assert once == cfg
    assert parse_config(once.to_json()) == once


def test_config_errors_are_line_anchored(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "n": 32,\n  "dt": "soon"\n}\n')
    assert main(["run", "--config", str(bad)]) == 2
    assert f"{bad}:3:" in capsys.readouterr().err
    bad.write_text('{\n  "n": 32,\n  "dtt": 0.1\n}\n')
    assert main(["run", "--config", str(bad)]) == 2
    assert f"{bad}:3: unknown key 'dtt'" in capsys.readouterr().err
    bad.write_text('{\n  "n": 32,\n  "dt": 0.1,\n}\n')
    assert main(["run", "--config", str(bad)]) == 2
    assert f"{bad}:4:" in capsys.readouterr().err
    bad.write_text('{\n  "n": 48\n}\n')
    assert main(["run", "--config", str(bad)]) == 2
    assert f"{bad}:2: n:" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["run", "--config", "/nonexistent/cfg.json"]) == 2
    assert main(["run", "--n-theta", "7"]) == 2
    assert main(["run", "--nu", "3"]) == 2
    with pytest.raises(ConfigError):
        parse_config("[1, 2]")


def test_flags_override_config(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 64, "s": 3.0, "K": 2.0, "seed": 1}))
    monkeypatch.setenv("FENE_OUT", str(tmp_path / "env_out"))
    assert main(["gen-data", "--config", str(cfg), "--n", "32", "--K", "1"]) == 0
    info = json.loads((tmp_path / "env_out" / "data.json").read_text())
    assert info["config"]["n"] == 32 and info["config"]["K"] == 1.0 and info["config"]["seed"] == 1
    assert main(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "flag_out")]) == 0
    assert (tmp_path / "flag_out" / "u0.vel").exists()


def test_gen_data_round_trip(tmp_path):
    out = tmp_path / "data"
    assert main(["gen-data", "--s", "1.8", "--p", "2", "--r", "2", "--K", "1", "--seed", "7",
                 "--out", str(out)]) == 0
    u0, _ = load_velocity(out / "u0.vel")
    psi0, _ = load_distribution(out / "psi0.psi")
    norm = besov_norm(u0, BesovParams(1.8, 2.0, 2.0))
    assert 0.5 <= norm <= 1.0 + 1e-12
    assert psi0.g.min() > 0
    assert (out / "u0.csv").exists()


def test_taylor_green_command(tmp_path, capsys):
    assert main(["taylor-green", "--nu", "0.01", "--n", "64", "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out
    assert line.startswith("max L2 error")
    report = json.loads((tmp_path / "taylor_green.json").read_text())
    assert report["max_l2_error"] < 1e-5 and report["config"]["nu"] == pytest.approx(0.01)


def test_run_command_writes_report(tmp_path):
    assert main(["run", *SMALL, "--nu", "0.1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "run_report.json").read_text())
    assert rep["completed"] and rep["config"]["dt"] == 0.01 and rep["config"]["seed"] == 7
    assert (tmp_path / "final.ckp").exists() and (tmp_path / "u_final.csv").exists()


def test_run_command_reports_abort(tmp_path):
    assert main(["run", *SMALL[:6], "--dt", "0.5", "--t-end", "1.0", "--K", "50",
                 "--out", str(tmp_path)]) == 1
    assert not json.loads((tmp_path / "run_report.json").read_text())["completed"]


def test_sweep_command(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"n": 32, "n_r": 8, "n_theta": 8, "dt": 0.01, "t_end": 0.05,
                               "nu_list": [0.25, 0.125, 0.0625]}))
    code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "rate_report.json").read_text())
    assert code == (0 if rep["passed"] else 1)
    assert rep["config"]["nu_list"] == [0.25, 0.125, 0.0625]
    assert (tmp_path / "rate_report.csv").exists() and (tmp_path / "curves" / "err_u.dat").exists()
    cfg.write_text(json.dumps({"n": 32, "nu_list": [0.25, 0.0]}))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_picard_command(tmp_path):
    code = main(["picard", *SMALL[:6], "--dt", "0.002", "--t-end", "0.02", "--K", "30",
                 "--seed", "3", "--nu", "0.1", "--n-iters", "9", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "picard_report.json").read_text())
    assert code == 0 and rep["pass"] and len(rep["A"]) == 8


def test_picard_contraction_rule():
    assert picard_contracts([0, 5, 4, 1, 0.5, 0.1, 0.04, 0.01, 0.001, 1e-4])
    assert not picard_contracts([0, 5, 4, 1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5])


def test_depend_smooth_and_lemma_commands(tmp_path):
    assert main(["depend", *SMALL, "--nu-list", "0,0.125,1", "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "dependence_report.json").read_text())["rows"]
    assert [r["nu"] for r in rows] == [0.0, 0.125, 1.0]
    assert main(["smooth", *SMALL, "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "smoothing_report.json").read_text())["rows"]
    assert rows[-1]["solution_distance"] == 0.0
    code = main(["check-lemmas", "--n-samples", "2", "--out", str(tmp_path)])
    rep = json.loads((tmp_path / "lemma_report.json").read_text())
    assert code == (0 if rep["passed"] else 1)
    assert rep["config"]["n_samples"] == 2
    assert all(np.isfinite(x["max_ratio"]) for v in rep["lemmas"].values() for x in v["levels"])
