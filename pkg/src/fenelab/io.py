"""Binary snapshot formats (little-endian throughout).

Every record starts with an 8-byte magic, three ``int32`` sizes and two
``float64`` scalars:

* distribution ``FENEPSI1``: ``(N, N_r, N_theta)``, ``(k, time)``, then ``g``
  as float64 ordered x1, x2, r, theta (theta fastest);
* velocity ``FENEVEL1``: ``(N, ncomp, 0)``, ``(0, time)``, then the
  normalised Fourier coefficients as complex128, component-major, FFT order;
* checkpoint ``FENECKP1``: ``uint64`` manifest length, UTF-8 JSON manifest,
  then a velocity record and a distribution record.
"""

import json
import struct

import numpy as np

from .config_space import Distribution, build_config_grid
from .errors import InvalidArgument
from .lp_besov import SpectralField
from .spectral import grid_points

PSI_MAGIC = b"FENEPSI1"
VEL_MAGIC = b"FENEVEL1"
CKP_MAGIC = b"FENECKP1"
_HEADER = struct.Struct("<8siiidd")


def _read_header(fh, magic, path):
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise InvalidArgument(f"{path}: truncated header")
    got, a, b, c, x, t = _HEADER.unpack(raw)
    if got != magic:
        raise InvalidArgument(f"{path}: bad magic {got!r}, expected {magic!r}")
    return a, b, c, x, t


def _read_exact(fh, nbytes, path):
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise InvalidArgument(f"{path}: truncated data")
    return data


def write_distribution(fh, psi, time=0.0):
    grid = psi.grid
    fh.write(_HEADER.pack(PSI_MAGIC, psi.n, grid.n_r, grid.n_theta, grid.k, float(time)))
    fh.write(np.ascontiguousarray(psi.g.transpose(2, 3, 0, 1), dtype="<f8").tobytes())


def read_distribution(fh, path="<stream>", grid=None):
    n, n_r, n_t, k, t = _read_header(fh, PSI_MAGIC, path)
    count = n * n * n_r * n_t
    data = np.frombuffer(_read_exact(fh, 8 * count, path), dtype="<f8")
    if grid is None or (grid.n_r, grid.n_theta, grid.k) != (n_r, n_t, k):
        grid = build_config_grid(n_r, n_t, k)
    g = data.reshape(n, n, n_r, n_t).transpose(2, 3, 0, 1).astype(float)
    return Distribution(grid, np.ascontiguousarray(g)), t


def write_velocity(fh, u, time=0.0):
    fh.write(_HEADER.pack(VEL_MAGIC, u.n, u.ncomp, 0, 0.0, float(time)))
    fh.write(np.ascontiguousarray(u.coef, dtype="<c16").tobytes())


def read_velocity(fh, path="<stream>"):
    n, ncomp, _, _, t = _read_header(fh, VEL_MAGIC, path)
    data = np.frombuffer(_read_exact(fh, 16 * ncomp * n * n, path), dtype="<c16")
    coef = data.reshape(ncomp, n, n).astype(complex)
    return SpectralField(coef, divergence_free=ncomp == 2), t


def save_distribution(path, psi, time=0.0):
    with open(path, "wb") as fh:
        write_distribution(fh, psi, time)


def load_distribution(path, grid=None):
    with open(path, "rb") as fh:
        return read_distribution(fh, path, grid)


def save_velocity(path, u, time=0.0):
    with open(path, "wb") as fh:
        write_velocity(fh, u, time)


def load_velocity(path):
    with open(path, "rb") as fh:
        return read_velocity(fh, path)


def export_velocity_csv(path, u):
    """Physical samples with columns ``x1, x2, u1[, u2]``."""
    x, y = grid_points(u.n)
    vals = u.physical()
    cols = [x.ravel(), y.ravel()] + [c.ravel() for c in vals]
    names = ["x1", "x2"] + [f"u{i + 1}" for i in range(u.ncomp)]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")


def save_checkpoint(path, u, psi, time, manifest):
    meta = dict(manifest)
    meta["time"] = float(time)
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKP_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        write_velocity(fh, u, time)
        write_distribution(fh, psi, time)


def load_checkpoint(path, grid=None):
    """Returns ``(u, psi, time, manifest)``."""
    with open(path, "rb") as fh:
        if fh.read(8) != CKP_MAGIC:
            raise InvalidArgument(f"{path}: not a checkpoint file")
        (size,) = struct.unpack("<Q", _read_exact(fh, 8, path))
        manifest = json.loads(_read_exact(fh, size, path).decode())
        u, t = read_velocity(fh, path)
        psi, _ = read_distribution(fh, path, grid)
    return u, psi, t, manifest
