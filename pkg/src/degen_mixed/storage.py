"""On-disk formats: systems as MatrixMarket files plus a JSON manifest,
trajectories as CSV. All writes go through a temporary file and an atomic
rename, so a failed write never leaves a partial file behind."""

import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import dae
from . import linalg as la

MATRICES = ("R", "A", "B", "Mx", "My", "Mm")
TRAJECTORY_HEADER = "t,norm_u_X,norm_lambda_M,constraint_residual"


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no inf/nan; write them as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path, payload):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, default=_json_default)
    atomic_write_text(path, text + "\n")


def _mtx_bytes(M):
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, sp.coo_matrix(la.as_sparse(M)), symmetry="general", precision=17)
    return buf.getvalue()


def write_matrix(path, M):
    """MatrixMarket coordinate real general, 1-based indices."""
    atomic_write_bytes(path, _mtx_bytes(M))


def read_matrix(path):
    M = scipy.io.mmread(str(path))
    return sp.csr_matrix(M, dtype=float)


# ---------------------------------------------------------------- systems

def save_system(sys, directory, times=None):
    """Write matrices, tabulated loads and a manifest to `directory`.

    Loads f, g, gdot are sampled at `times` (default: 65 points on [0, T])
    and stored in ``loads.npz`` together with u0.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if times is None:
        times = np.linspace(0.0, sys.T, 65)
    times = np.asarray(times, dtype=float)
    files = {}
    for name in MATRICES:
        fname = f"{name}.mtx"
        write_matrix(directory / fname, getattr(sys, name))
        files[name] = fname
    F = np.array([np.asarray(sys.f(t), dtype=float) for t in times]).reshape(len(times), sys.n)
    G = np.array([np.asarray(sys.g(t), dtype=float) for t in times]).reshape(len(times), sys.m)
    Gd = np.array([np.asarray(sys.gdot(t), dtype=float)
                   for t in times]).reshape(len(times), sys.m)
    buf = io.BytesIO()
    np.savez(buf, t=times, f=F, g=G, gdot=Gd, u0=np.asarray(sys.u0, dtype=float))
    atomic_write_bytes(directory / "loads.npz", buf.getvalue())
    files["loads"] = "loads.npz"
    manifest = {"n": sys.n, "m": sys.m, "T": sys.T, "files": files, "problem": sys.name,
                "g_regular": bool(sys.g_regular)}
    write_json(directory / "manifest.json", manifest)
    return directory / "manifest.json"


def _tabulated(times, values):
    def load(t):
        return np.array([np.interp(t, times, col) for col in values.T])
    return load


def load_system(directory):
    """Inverse of :func:`save_system`; loads are interpolated linearly in time."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    mats = {name: read_matrix(directory / manifest["files"][name]) for name in MATRICES}
    n, m = int(manifest["n"]), int(manifest["m"])
    for name, M in mats.items():
        if name in ("R", "A", "Mx", "My") and M.shape != (n, n):
            raise ValueError(f"{name}.mtx has shape {M.shape}, manifest says n={n}")
    with np.load(directory / manifest["files"]["loads"]) as data:
        t, F, G, Gd, u0 = (data[k] for k in ("t", "f", "g", "gdot", "u0"))
    return dae.DiscreteMixedSystem(
        f=_tabulated(t, F), g=_tabulated(t, G.reshape(len(t), m)),
        gdot=_tabulated(t, Gd.reshape(len(t), m)), u0=u0, T=float(manifest["T"]),
        name=manifest.get("problem", "system"),
        g_regular=bool(manifest.get("g_regular", True)), **mats)


# ---------------------------------------------------------------- trajectories

def _fmt(x):
    return format(float(x), ".17g")


def trajectory_table(sys, traj):
    """Columns t, ||u||_X, ||lam||_M and ||B u - g|| per time step."""
    res, _ = traj.constraint_residuals(sys)
    return np.column_stack([traj.times, traj.u_norms(sys.Mx), traj.lam_norms(sys.Mm), res])


def trajectory_csv(sys, traj):
    rows = [TRAJECTORY_HEADER]
    for row in trajectory_table(sys, traj):
        rows.append(",".join(_fmt(v) for v in row))
    return "\n".join(rows) + "\n"


def write_trajectory(path, sys, traj):
    atomic_write_text(path, trajectory_csv(sys, traj))


def write_state(path, traj):
    """Full state: t, u_0..u_{n-1}, lam_0..lam_{m-1}."""
    n, m = traj.u.shape[1], traj.lam.shape[1]
    head = ["t"] + [f"u_{i}" for i in range(n)] + [f"lambda_{i}" for i in range(m)]
    rows = [",".join(head)]
    for t, u, lam in zip(traj.times, traj.u, traj.lam):
        rows.append(",".join(_fmt(v) for v in np.concatenate([[t], u, lam])))
    atomic_write_text(path, "\n".join(rows) + "\n")


def read_trajectory(path):
    text = Path(path).read_text().splitlines()
    if text[0] != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected header {text[0]!r}")
    return np.array([[float(v) for v in line.split(",")] for line in text[1:] if line])


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
