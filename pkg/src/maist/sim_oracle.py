"""Direct simulation of the sampled closed loop ``x+ = M(kappa(x)) x``.

Used as an independent check on the abstraction and the verifier.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .feasibility import sphere_points
from .petc_model import PetcSystem, kappa


@dataclass(frozen=True)
class Trajectory:
    initial: np.ndarray
    symbols: tuple
    renormalized: bool = True


def simulate(sys: PetcSystem, x0, steps: int) -> Trajectory:
    """Inter-sample times of ``steps`` consecutive samples from ``x0``.

    The state is rescaled to unit norm after every step; kappa is
    homogeneous so the symbols are unaffected. ``x0 = 0`` triggers at kbar
    forever.
    """
    x = np.asarray(x0, dtype=float).ravel()
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return Trajectory(initial=x, symbols=(sys.kbar,) * steps)
    x = x / nrm
    x_init = x.copy()
    out = []
    for _ in range(steps):
        k = kappa(sys, x)
        out.append(k)
        x = sys.m(k) @ x
        nrm = np.linalg.norm(x)
        if nrm == 0.0:
            # collapsed onto the origin (singular M); origin triggers at kbar
            out.extend([sys.kbar] * (steps - len(out)))
            break
        x = x / nrm
    return Trajectory(initial=x_init, symbols=tuple(out))


def simulate_batch(sys: PetcSystem, x0s, steps: int) -> np.ndarray:
    """Symbols of many trajectories at once, shape ``(len(x0s), steps)``.

    Same recurrence as :func:`simulate`, vectorized over initial states.
    """
    x = np.array(x0s, dtype=float).reshape(-1, sys.n_x)
    nrm = np.linalg.norm(x, axis=1)
    alive = nrm > 0
    x[alive] /= nrm[alive, None]
    ns = np.array(sys.N[:-1]) if sys.kbar > 1 else np.zeros((0, sys.n_x, sys.n_x))
    ms = np.array(sys.M)
    out = np.full((len(x), steps), sys.kbar, dtype=np.int64)
    for t in range(steps):
        if not alive.any():
            break
        vals = np.einsum("mi,kij,mj->mk", x, ns, x) > 0
        k = np.where(vals.any(axis=1), vals.argmax(axis=1) + 1, sys.kbar)
        k[~alive] = sys.kbar
        out[:, t] = k
        x = np.einsum("mij,mj->mi", ms[k - 1], x)
        nrm = np.linalg.norm(x, axis=1)
        alive &= nrm > 0
        x[alive] /= nrm[alive, None]
    return out


def running_averages(sys: PetcSystem, symbols) -> np.ndarray:
    s = np.asarray(symbols, dtype=float)
    return sys.h * np.cumsum(s) / np.arange(1, len(s) + 1)


def empirical_aist(sys: PetcSystem, x0, steps: int) -> float:
    """Estimate of the liminf average inter-sample time from ``x0``.

    Minimum of the running averages over the second half of the run.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    traj = simulate(sys, x0, steps)
    avg = running_averages(sys, traj.symbols)
    return float(avg[steps // 2:].min())


def empirical_aist_batch(sys: PetcSystem, x0s, steps: int) -> np.ndarray:
    """:func:`empirical_aist` for every row of ``x0s``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    syms = simulate_batch(sys, x0s, steps)
    avg = sys.h * np.cumsum(syms, axis=1) / np.arange(1, steps + 1)
    return avg[:, steps // 2:].min(axis=1)


def pattern_detect(traj, max_period: Optional[int] = None) -> Optional[tuple]:
    """Shortest period ``p`` (then shortest prefix ``d``) that the observed symbols repeat with.

    The periodic part has to cover at least half of the trace and hold at
    least two full periods.
    """
    s = traj.symbols if isinstance(traj, Trajectory) else tuple(traj)
    n = len(s)
    if n < 4:
        raise ValueError("need at least 4 symbols")
    arr = np.asarray(s)
    top = n // 2 if max_period is None else min(max_period, n // 2)
    for p in range(1, top + 1):
        same = arr[:-p] == arr[p:]
        # last index where the shift disagrees
        bad = np.flatnonzero(~same)
        d = 0 if bad.size == 0 else int(bad[-1]) + 1
        if d <= n // 2 and n - d >= 2 * p:
            return d, p
    return None


def sample_initial_states(n: int, count: int, seed: int = 0) -> np.ndarray:
    return sphere_points(n, count, seed)


def write_trace(sys: PetcSystem, traj: Trajectory, fh: TextIO) -> None:
    w = csv.writer(fh)
    w.writerow(["step", "symbol", "running_average"])
    for i, (k, a) in enumerate(zip(traj.symbols, running_averages(sys, traj.symbols))):
        w.writerow([i, k, f"{a:.12g}"])
