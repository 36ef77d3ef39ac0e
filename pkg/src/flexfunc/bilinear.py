"""Bilinear scalar toy system in three guises, used to validate the solvers.

The same right-hand side r1 x + r2 x (disturbance) is treated as

* a deterministic system driven by a known signal w(t),
* the mean equation dE/dt = (r1 + r2 omega) E for a disturbance with
  constant expectation omega,
* an Ito SDE dx = r1 x dt + r2 x dw with exact solution
  x(t) = x0 exp((r1 - r2^2 / 2) t + r2 w(t)).

The closed forms make the system a sharp oracle: the mean equation is
linear, the SDE is exactly solvable pathwise, and the almost-sure growth
rate r1 - r2^2 / 2 can differ in sign from the mean growth rate r1 + r2
(mean-square unstable but almost-surely stable, and vice versa).  A strong
convergence study of Euler-Maruyama against the exact solution on shared
Brownian increments exhibits the order-1/2 error decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng
from .dynamics import Trajectory


@dataclass(frozen=True)
class BilinearParams:
    r1: float = 1.0
    r2: float = -1.2
    x0: float = 1.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.x0):
            raise ValueError(f"x0 must be finite, got {self.x0}")

    @property
    def as_growth(self) -> float:
        """Almost-sure exponential growth rate of the Ito system."""
        return self.r1 - 0.5 * self.r2**2


def _time_grid(dt: float, t_end: float) -> np.ndarray:
    if dt <= 0.0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    n = max(1, int(round(t_end / dt)))
    return np.arange(n + 1) * dt


def disturbed_ode(
    bp: BilinearParams,
    w: Callable[[float], float],
    dt: float,
    t_end: float,
) -> Trajectory:
    """Fourth-order integration of dx/dt = r1 x + r2 x w(t)."""
    times = _time_grid(dt, t_end)
    xs = np.empty(len(times))
    x = float(bp.x0)
    xs[0] = x

    def rhs(t: float, y: float) -> float:
        return bp.r1 * y + bp.r2 * y * w(t)

    for i in range(len(times) - 1):
        t = times[i]
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x += dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        xs[i + 1] = x
    return Trajectory(times=times, states=xs)


def mean_ode(bp: BilinearParams, omega: float, dt: float, t_end: float) -> Trajectory:
    """Mean evolution dE/dt = (r1 + r2 omega) E; closed form is exponential."""
    return disturbed_ode(bp, lambda t: omega, dt, t_end)


def exact_path(bp: BilinearParams, times: np.ndarray, w_path: np.ndarray) -> np.ndarray:
    """Pathwise exact solution of the Ito SDE on a given Brownian path."""
    times = np.asarray(times, dtype=float)
    w_path = np.asarray(w_path, dtype=float)
    if times.shape != w_path.shape:
        raise ValueError("times and w_path must have matching shapes")
    return bp.x0 * np.exp(bp.as_growth * times + bp.r2 * w_path)


def em_path(bp: BilinearParams, dt: float, dw: np.ndarray) -> np.ndarray:
    """Euler-Maruyama path of the Ito SDE from Brownian increments dw."""
    dw = np.asarray(dw, dtype=float)
    xs = np.empty(len(dw) + 1)
    x = float(bp.x0)
    xs[0] = x
    for i, inc in enumerate(dw):
        x = x + bp.r1 * x * dt + bp.r2 * x * inc
        xs[i + 1] = x
    return xs


@dataclass(frozen=True)
class ConvergenceStudy:
    dts: np.ndarray
    errors: np.ndarray  # mean |x_em(T) - x_exact(T)| over paths
    slope: float

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("dt,strong_error\n")
            for dt, err in zip(self.dts, self.errors):
                fh.write(f"{float(dt)!r},{float(err)!r}\n")


_DEFAULT_DTS = tuple(2.0**-l for l in range(6, 13))


def strong_convergence_study(
    bp: BilinearParams,
    dts: Sequence[float] = _DEFAULT_DTS,
    n_paths: int = 1000,
    master_seed: int = 2024,
    t_end: float = 1.0,
) -> ConvergenceStudy:
    """Strong error of Euler-Maruyama at t_end for each step size in dts.

    All step sizes share the same Brownian paths: increments are drawn once
    at the finest resolution with per-path counter-based streams and summed
    in groups for the coarser grids, so the exact terminal value is common
    and the error decay is a pure discretization effect.  Every dt must be
    an integer multiple of the finest dt dividing t_end in whole steps.
    """
    dts = np.asarray(sorted(set(float(d) for d in dts), reverse=True))
    if dts.size < 2:
        raise ValueError("need at least two distinct step sizes to fit a slope")
    if dts[-1] <= 0.0:
        raise ValueError("step sizes must be positive")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    dt_fine = dts[-1]
    n_fine = int(round(t_end / dt_fine))
    if abs(n_fine * dt_fine - t_end) > 1e-12 * t_end:
        raise ValueError("finest dt must divide t_end in whole steps")
    ratios = []
    for dt in dts:
        r = int(round(dt / dt_fine))
        if abs(r * dt_fine - dt) > 1e-12 * dt or n_fine % r != 0:
            raise ValueError(f"dt {dt} is not a whole multiple of the finest dt {dt_fine}")
        ratios.append(r)

    z = np.empty((n_paths, n_fine))
    for p in range(n_paths):
        z[p] = rng.path_normals(master_seed, p, n_fine)
    dw_fine = math.sqrt(dt_fine) * z
    w_end = dw_fine.sum(axis=1)
    x_exact_end = bp.x0 * np.exp(bp.as_growth * t_end + bp.r2 * w_end)

    errors = np.empty(dts.size)
    for j, (dt, ratio) in enumerate(zip(dts, ratios)):
        dw = dw_fine.reshape(n_paths, -1, ratio).sum(axis=2)
        x = np.full(n_paths, float(bp.x0))
        for i in range(dw.shape[1]):
            x = x + bp.r1 * x * dt + bp.r2 * x * dw[:, i]
        errors[j] = np.mean(np.abs(x - x_exact_end))
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return ConvergenceStudy(dts=dts, errors=errors, slope=slope)


def as_growth_estimate(
    bp: BilinearParams,
    t_end: float = 10.0,
    n_paths: int = 1000,
    master_seed: int = 99,
) -> float:
    """Monte Carlo estimate of the almost-sure growth rate log|x(T)| / T."""
    rates = np.empty(n_paths)
    for p in range(n_paths):
        z = rng.path_normals(master_seed, p, 1)
        w_end = math.sqrt(t_end) * z[0]
        x_end = bp.x0 * math.exp(bp.as_growth * t_end + bp.r2 * w_end)
        rates[p] = math.log(abs(x_end)) / t_end
    return float(rates.mean())


def demo_paths(
    bp: BilinearParams,
    t_end: float = 1.0,
    n_steps: int = 256,
    master_seed: int = 7,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Euler-Maruyama path next to the exact path on the same noise."""
    dt = t_end / n_steps
    dw = math.sqrt(dt) * rng.path_normals(master_seed, 0, n_steps)
    times = np.arange(n_steps + 1) * dt
    w_path = np.concatenate(([0.0], np.cumsum(dw)))
    return times, em_path(bp, dt, dw), exact_path(bp, times, w_path)


def write_paths_csv(path, times: np.ndarray, x_em: np.ndarray, x_exact: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x_em,x_exact\n")
        for t, a, b in zip(times, x_em, x_exact):
            fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r}\n")
