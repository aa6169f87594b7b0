import io as _io

import numpy as np
import pytest

from fenelab.config_space import Distribution
from fenelab.errors import InvalidArgument
from fenelab.fluid import taylor_green
from fenelab.io import (
    export_velocity_csv, load_checkpoint, load_distribution, load_velocity, read_distribution,
    save_checkpoint, save_distribution, save_velocity, write_distribution,
)


def test_distribution_round_trip(tmp_path, grid8):
    rng = np.random.default_rng(0)
    psi = Distribution(grid8, rng.standard_normal((8, 8, 16, 16)))
    path = tmp_path / "a.psi"
    save_distribution(path, psi, time=0.25)
    back, t = load_distribution(path, grid8)
    assert t == 0.25 and back.grid is grid8 and np.array_equal(back.g, psi.g)
    fresh, _ = load_distribution(path)
    assert np.array_equal(fresh.grid.mass, grid8.mass)


def test_distribution_layout_is_x_major(grid8):
    g = np.zeros((8, 8, 4, 4))
    g[1, 2, 3, 0] = 7.0
    buf = _io.BytesIO()
    write_distribution(buf, Distribution(grid8, g))
    data = np.frombuffer(buf.getvalue()[36:], dtype="<f8")
    assert data[((3 * 4 + 0) * 8 + 1) * 8 + 2] == 7.0


def test_velocity_round_trip(tmp_path):
    u = taylor_green(16, 0.3)
    path = tmp_path / "u.vel"
    save_velocity(path, u, time=1.5)
    back, t = load_velocity(path)
    assert t == 1.5 and back.divergence_free and np.array_equal(back.coef, u.coef)


def test_bad_and_truncated_files(tmp_path, grid8):
    path = tmp_path / "x.psi"
    save_distribution(path, Distribution.equilibrium(grid8, 4))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(InvalidArgument, match="truncated"):
        load_distribution(path)
    path.write_bytes(b"FENEVEL1" + raw[8:])
    with pytest.raises(InvalidArgument, match="magic"):
        load_distribution(path)
    path.write_bytes(raw[:10])
    with pytest.raises(InvalidArgument):
        read_distribution(open(path, "rb"))


def test_checkpoint_round_trip(tmp_path, grid8):
    u = taylor_green(16)
    psi = Distribution.equilibrium(grid8, 16)
    path = tmp_path / "c.ckp"
    save_checkpoint(path, u, psi, 0.125, {"config": {"n": 16}})
    u2, psi2, t, manifest = load_checkpoint(path, grid8)
    assert t == 0.125 and manifest["config"]["n"] == 16 and manifest["time"] == 0.125
    assert np.array_equal(u2.coef, u.coef) and np.array_equal(psi2.g, psi.g)
    (tmp_path / "bad.ckp").write_bytes(b"nothing here")
    with pytest.raises(InvalidArgument):
        load_checkpoint(tmp_path / "bad.ckp")


def test_velocity_csv(tmp_path):
    u = taylor_green(16)
    path = tmp_path / "u.csv"
    export_velocity_csv(path, u)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,u1,u2" and len(lines) == 257
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(table[:, 2], np.sin(table[:, 0]) * np.cos(table[:, 1]), atol=1e-14)
