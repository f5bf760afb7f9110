"""Flat-binary field snapshots with JSON sidecars, and CSV monitors."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from mhd2d.grid import Grid, RealField

__all__ = ["save_field", "load_field", "save_flow_snapshot", "save_euler_snapshot", "write_rows_csv"]


def save_field(path_base: str, field: RealField, **meta) -> None:
    """Write ``<base>.bin`` (little-endian float64, row-major) + ``<base>.json``."""
    g = field.grid
    arr = np.ascontiguousarray(field.samples, dtype="<f8")
    with open(path_base + ".bin", "wb") as fh:
        fh.write(arr.tobytes())
    sidecar = {
        "nx": g.nx,
        "ny": g.ny,
        "lx": g.lx,
        "ly": g.ly,
        "dtype": "<f8",
        "order": "row-major (x1, x2)",
    }
    sidecar.update(meta)
    with open(path_base + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_field(path_base: str) -> tuple[RealField, dict]:
    with open(path_base + ".json") as fh:
        meta = json.load(fh)
    g = Grid(meta["nx"], meta["ny"], meta["lx"], meta["ly"])
    arr = np.frombuffer(open(path_base + ".bin", "rb").read(), dtype="<f8").reshape(g.shape)
    return RealField(g, arr.astype(float)), meta


def save_flow_snapshot(directory: str, state, prefix: str = "") -> None:
    os.makedirs(directory, exist_ok=True)
    t = state.t
    for name, f in (
        ("Y1", state.Y[0]),
        ("Y2", state.Y[1]),
        ("Yt1", state.Y_t[0]),
        ("Yt2", state.Y_t[1]),
        ("q", state.q),
    ):
        save_field(os.path.join(directory, prefix + name), f, time=t, name=name)


def save_euler_snapshot(directory: str, state, prefix: str = "") -> None:
    os.makedirs(directory, exist_ok=True)
    t = state.t
    for name, f in (
        ("psi", state.psi),
        ("u1", state.u[0]),
        ("u2", state.u[1]),
        ("p", state.p),
    ):
        save_field(os.path.join(directory, prefix + name), f, time=t, name=name)


def write_rows_csv(path: str, rows, header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow(row)
