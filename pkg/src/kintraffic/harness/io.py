"""Macroscopic CSV and full-field snapshot files."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

MACRO_COLUMNS = ("t", "x", "rho", "mean_v", "flux")


def _g(value: float) -> str:
    return "%.17g" % value


def write_macro_csv(trajectory, path) -> None:
    """One row per recorded time and x-cell; an empty trajectory gives the header only."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MACRO_COLUMNS)
        x = trajectory.grid.x
        for t, m in zip(trajectory.times, trajectory.macros):
            for ix in range(x.size):
                w.writerow((_g(t), _g(x[ix]), _g(m.rho[ix]), _g(m.mean_v[ix]), _g(m.flux[ix])))


def read_macro_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = np.array([[float(v) for v in r] for r in body]).reshape(-1, len(header))
    return {name: cols[:, i] for i, name in enumerate(header)}


def write_f_snapshot(f: np.ndarray, path, t: float = 0.0) -> None:
    """Header ``t n_x n_v n_u`` (the values), then ``ix iv iu value`` per cell."""
    f = np.asarray(f, dtype=float)
    n_x, n_v, n_u = f.shape
    idx = np.indices(f.shape).reshape(3, -1).T
    vals = f.ravel()
    with open(path, "w") as fh:
        fh.write(f"{_g(t)} {n_x} {n_v} {n_u}\n")
        fh.writelines(f"{i} {j} {k} {_g(v)}\n" for (i, j, k), v in zip(idx, vals))


def read_f_snapshot(path):
    """Return ``(t, f)`` from a snapshot file; values round-trip bitwise."""
    with open(Path(path)) as fh:
        t, n_x, n_v, n_u = fh.readline().split()
        f = np.zeros((int(n_x), int(n_v), int(n_u)))
        for line in fh:
            i, j, k, v = line.split()
            f[int(i), int(j), int(k)] = float(v)
    return float(t), f
