"""Brownian driving functions for Loewner flows.

A driving path is xi_k = sqrt(kappa) * B(t_k) on the uniform capacity-time
grid t_k = k*T/n.  Increments come from a counter-based recipe, so any single
increment is recomputable in isolation and ensembles parallelize with no
shared state:

    raw_k = k-th 64-bit word of the Philox4x64 stream keyed by ``seed``
    u_k   = ((raw_k >> 11) + 1/2) * 2**-53        uniform in (0, 1)
    z_k   = ndtri(u_k)                            standard normal
    xi_{k+1} - xi_k = sqrt(kappa * dt) * z_k

This recipe is part of the reproducibility contract: identical
(grid, kappa, seed) always produce bitwise-identical paths, and the raw
normals do not depend on kappa (so paths scale exactly with sqrt(kappa)).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

__all__ = [
    "TimeGrid",
    "DrivingPath",
    "sample_brownian",
    "explicit_path",
    "reverse_driving",
    "quadratic_variation",
    "raw_normals",
    "normal_increment",
    "path_to_csv",
    "path_to_json",
    "path_from_json",
]

_KEY_MOD = 1 << 128  # Philox key width


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0, T/n, 2T/n, ..., T in half-plane capacity time.

    Grid times are always computed as k*T/n (never by accumulating dt), so
    time n is exactly the horizon.
    """

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def time(self, k: int) -> float:
        return k * self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.horizon / self.n_steps


@dataclass(frozen=True, eq=False)
class DrivingPath:
    """Discretized driving function.

    ``values[k]`` is xi at grid time k; there are ``n_steps + 1`` entries.
    Instances are immutable (the value array is marked read-only) and safe to
    share across concurrent workers.
    """

    grid: TimeGrid
    kappa: float
    values: np.ndarray
    seed: int
    origin: str  # "sampled" | "reversed" | "explicit"

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.origin not in ("sampled", "reversed", "explicit"):
            raise ValueError(f"unknown origin {self.origin!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"need {self.grid.n_steps + 1} values, got shape {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps


def raw_normals(seed: int, n: int) -> np.ndarray:
    """First n standard normals of the counter-based stream keyed by seed."""
    raw = Philox(key=seed % _KEY_MOD).random_raw(n)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)

def normal_increment(seed: int, k: int) -> float:
    """Standard normal number k of the stream, computed without its
    predecessors (Philox counters advance in blocks of four 64-bit words)."""
    gen = Philox(key=seed % _KEY_MOD)
    gen.advance(k // 4)
    raw = int(gen.random_raw(k % 4 + 1)[-1])
    return float(ndtri(((raw >> 11) + 0.5) * 2.0**-53))


def sample_brownian(grid: TimeGrid, kappa: float, seed: int) -> DrivingPath:
    """Sample xi_t = sqrt(kappa) B_t on the grid, xi_0 = 0.

    Deterministic in (grid, kappa, seed).  Increment k is
    sqrt(kappa*dt) times standard normal k of the stream keyed by seed.
    """
    if not kappa > 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    z = raw_normals(seed, grid.n_steps)
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    np.cumsum(np.sqrt(kappa * grid.dt) * z, out=values[1:])
    return DrivingPath(grid, float(kappa), values, int(seed), "sampled")


def explicit_path(grid: TimeGrid, kappa: float, values, seed: int = 0) -> DrivingPath:
    """Wrap caller-supplied driving values (e.g. zero driving for exact tests)."""
    return DrivingPath(grid, float(kappa), np.asarray(values, dtype=np.float64),
                       int(seed), "explicit")


def reverse_driving(path: DrivingPath) -> DrivingPath:
    """Time-reversed driving: xi~_k = xi_{n-k} on the same grid."""
    if path.grid.n_steps < 1:
        raise ValueError("need at least 2 grid points")
    return DrivingPath(path.grid, path.kappa, path.values[::-1].copy(),
                       path.seed, "reversed")


def quadratic_variation(path: DrivingPath) -> float:
    """Sum of squared increments; estimates kappa*T for Brownian driving."""
    return float(np.sum(np.square(np.diff(path.values))))


def path_to_csv(path: DrivingPath, dest) -> None:
    """Write columns (t, xi).  ``dest`` is a file path or text file object."""
    if hasattr(dest, "write"):
        _write_csv(path, dest)
    else:
        with open(dest, "w", newline="") as fh:
            _write_csv(path, fh)


def _write_csv(path: DrivingPath, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "xi"])
    for t, x in zip(path.grid.times(), path.values):
        w.writerow([repr(float(t)), repr(float(x))])


def path_to_json(path: DrivingPath) -> dict:
    return {
        "kappa": path.kappa,
        "T": path.grid.horizon,
        "n_steps": path.grid.n_steps,
        "seed": path.seed,
        "values": [float(v) for v in path.values],
    }


def path_from_json(record: dict) -> DrivingPath:
    grid = TimeGrid(record["T"], record["n_steps"])
    return DrivingPath(grid, record["kappa"], np.array(record["values"]),
                       record.get("seed", 0), "explicit")
