"""Independent reference solutions and an alternative relaxation scheme.

The exact Riemann solver and the Godunov scheme never touch kinetic
machinery, so agreement with them is a genuine cross-check of the
transport-collapse modules.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fluxes import HomogeneousFlux
from .homogeneous import _stream, tc_step, Trajectory
from .kinetic import (
    ScalarField,
    SpatialGrid,
    VelocityGrid,
    check_range,
    chi_cell_integral,
    l1_distance,
    lift,
)
from .paths import DriverPath, TimePartition, align, delta_z

THREADS_ENV = "TRANSPORT_COLLAPSE_THREADS"


class CFLError(ValueError):
    pass


class NestingError(ValueError):
    pass


# ---------------------------------------------------------------- Riemann

def exact_riemann_burgers(u_l: float, u_r: float, x, t: float):
    """Entropy solution of Burgers' Riemann problem with the jump at ``x = 0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    if u_l == u_r:
        out = np.full_like(x, float(u_l))
    elif t == 0.0:
        out = np.where(x < 0.0, float(u_l), float(u_r))
    elif u_l > u_r:
        out = np.where(x < 0.5 * (u_l + u_r) * t, float(u_l), float(u_r))
    else:
        out = np.clip(x / t, u_l, u_r)
    return float(out) if out.ndim == 0 else out


def _riemann_antiderivative(u_l: float, u_r: float, y: np.ndarray, t: float) -> np.ndarray:
    """A continuous antiderivative in ``y`` of ``exact_riemann_burgers(u_l, u_r, y, t)``."""
    if u_l == u_r or t == 0.0:
        return u_l * np.minimum(y, 0.0) + u_r * np.maximum(y, 0.0)
    if u_l > u_r:
        s = 0.5 * (u_l + u_r) * t
        return u_l * np.minimum(y, s) + u_r * np.maximum(y - s, 0.0)
    a, b = u_l * t, u_r * t
    mid = np.clip(y, a, b)
    return u_l * np.minimum(y, a) + (mid**2 - a**2) / (2 * t) + u_r * np.maximum(y - b, 0.0)


def riemann_cell_averages(grid: SpatialGrid, u_l: float, u_r: float, x0: float, t: float) -> np.ndarray:
    """Exact cell averages of the Riemann solution centred at ``x0`` (on the line, no wrap)."""
    if grid.dimension != 1:
        raise ValueError("Riemann oracle is one-dimensional")
    H = _riemann_antiderivative(float(u_l), float(u_r), grid.edges(0) - x0, t)
    return np.diff(H) / grid.dx[0]


def riemann_field(grid: SpatialGrid, u_l: float, u_r: float, x0: float) -> ScalarField:
    """Periodic Riemann data: ``u_l`` on ``[origin, x0)``, ``u_r`` on ``[x0, origin + L)``."""
    return ScalarField(grid, riemann_cell_averages(grid, u_l, u_r, x0, 0.0))


def riemann_window(grid: SpatialGrid, x0: float) -> np.ndarray:
    """Cells within a quarter period of ``x0``.

    Periodic Riemann data carries a second jump at the wrap point; up to the
    time the two wave fans meet, the line solution is exact on this window.
    """
    return np.abs(grid.centers(0) - x0) < 0.25 * grid.length[0]


def riemann_l1_error(u: ScalarField, u_l: float, u_r: float, x0: float, t: float, window: bool = True) -> float:
    exact = riemann_cell_averages(u.grid, u_l, u_r, x0, t)
    err = np.abs(u.values - exact)
    if window:
        err = err[riemann_window(u.grid, x0)]
    return float(err.sum() * u.grid.cell_volume)


# ---------------------------------------------------------------- Godunov

def godunov_flux(A: Callable, u_left, u_right):
    """Godunov flux for a convex flux minimised at zero."""
    return np.maximum(A(np.maximum(u_left, 0.0)), A(np.minimum(u_right, 0.0)))


def godunov_run(u0: ScalarField, flux: HomogeneousFlux, T: float, dt: float, cfl: float = 1.0) -> ScalarField:
    """First-order periodic finite-volume evolution to time ``T``.

    The last step is shortened so that ``T`` is hit exactly.
    """
    if u0.grid.dimension != 1 or flux.dimension != 1:
        raise ValueError("godunov_run is one-dimensional")
    if T < 0 or dt <= 0:
        raise ValueError("need T >= 0 and dt > 0")
    dx = u0.grid.dx[0]
    eta = u0.norm(np.inf)
    speed = float(np.abs(flux.speed(np.linspace(-eta, eta, 4001))).max())
    if speed * dt > cfl * dx * (1 + 1e-12):
        raise CFLError(f"CFL violated: max|a| dt = {speed * dt:.4g} > {cfl} dx = {cfl * dx:.4g}")
    A = flux.polys[0]
    u = np.array(u0.values)
    n_full = int(math.floor(T / dt + 1e-12))
    steps = [dt] * n_full
    rest = T - n_full * dt
    if rest > 1e-12 * max(T, 1.0):
        steps.append(rest)
    for h in steps:
        F = godunov_flux(A, u, np.roll(u, -1))  # flux through the right face
        u = u - h / dx * (F - np.roll(F, 1))
    return ScalarField(u0.grid, u)


# ---------------------------------------------------------------- BGK

def bgk_run(
    u0: ScalarField,
    flux: HomogeneousFlux,
    vgrid: VelocityGrid,
    z: DriverPath,
    p: TimePartition,
    epsilon: float,
) -> ScalarField:
    """Free streaming followed by exact relaxation toward the Maxwellian.

    The relaxation ``f <- w f + (1 - w) Mf`` with ``w = exp(-dt/epsilon)``
    integrates the stiff source with the Maxwellian frozen.  When ``w``
    underflows to zero the step is the collapse itself and ``tc_step`` is
    used, so the two schemes coincide bit for bit in that limit.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    check_range(u0, vgrid)
    w = math.exp(-p.dt / epsilon)
    z = align(z, p)
    zk = z(p.times)
    if w == 0.0:
        u = u0
        for k in range(p.K):
            u, _ = tc_step(u, flux, vgrid, zk[k + 1] - zk[k], k)
        return u
    f = lift(u0, vgrid).values
    speeds = flux.speed(vgrid.midpoints)
    lower, upper, dxi = vgrid.lower, vgrid.upper, vgrid.dxi
    for k in range(p.K):
        f = _stream(f, speeds, np.atleast_1d(zk[k + 1] - zk[k]), u0.grid.dx)
        u = f.sum(axis=-1) * dxi
        Mf = chi_cell_integral(u[..., None], lower, upper) / dxi
        f = w * f + (1.0 - w) * Mf
    return ScalarField(u0.grid, f.sum(axis=-1) * dxi)


# ---------------------------------------------------------------- studies

def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan if undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2 or np.ptp(np.log(x[ok])) == 0.0:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


@dataclass
class ConvergenceRow:
    dt: float
    delta_z: float
    l1_error: float
    bound: float
    slope_cum: float


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    reference_dt: float
    trajectories: dict[int, Trajectory] = field(default_factory=dict, repr=False)

    COLUMNS = ("dt", "delta_z", "l1_error", "bound", "slope_cum")

    @property
    def slope(self) -> float:
        return fit_slope([r.delta_z for r in self.rows], [r.l1_error for r in self.rows])

    def slope_in_dt(self) -> float:
        return fit_slope([r.dt for r in self.rows], [r.l1_error for r in self.rows])

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]

    def as_rows(self) -> list[tuple[float, ...]]:
        return [tuple(getattr(r, c) for c in self.COLUMNS) for r in self.rows]


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def self_convergence_study(
    runner: Callable[[TimePartition, Sequence[float]], Trajectory],
    T: float,
    dts: Sequence[float],
    reference_dt: float,
    path: DriverPath,
    exact: Callable[[ScalarField, float], float] | None = None,
    bound: Callable[[float], float] | None = None,
    snapshot_dt: float | None = None,
    endpoint_only: bool = False,
) -> ConvergenceTable:
    """Errors of ``runner`` at each ``dt`` against a run at ``reference_dt``.

    ``runner(p, snapshot_times)`` returns a trajectory holding snapshots at the
    requested times.  The error of a row is the largest L1 distance over the
    snapshot times, which default to the partition points of the coarsest
    ``dt``.  With ``exact`` supplied, ``exact(u, t)`` replaces the reference
    run as the error functional and is evaluated at the final time only.
    """
    ref = TimePartition.from_dt(T, reference_dt)
    parts = [TimePartition.from_dt(T, dt) for dt in dts]
    for q in parts:
        if not ref.refines(q):
            raise NestingError(f"reference dt {reference_dt} does not nest in dt {q.dt}")
    coarse = TimePartition.from_dt(T, snapshot_dt) if snapshot_dt is not None else min(parts, key=lambda q: q.K)
    if any(not q.refines(coarse) for q in parts):
        raise NestingError("snapshot times are not partition points of every run")
    snaps = [float(t) for t in coarse.times[1:]] if exact is None else [T]

    jobs = parts if exact is not None else [ref] + parts
    threads = min(thread_count(), len(jobs))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(lambda q: runner(q, snaps), jobs))
    else:
        runs = [runner(q, snaps) for q in jobs]
    trajs = {q.K: tr for q, tr in zip(jobs, runs)}

    rows: list[ConvergenceRow] = []
    for q in parts:
        tr = trajs[q.K]
        if exact is not None:
            err = exact(tr.final, T)
        else:
            err = max(l1_distance(tr.snapshots[t], trajs[ref.K].snapshots[t]) for t in snaps)
        dz = delta_z(path, q, endpoint_only=endpoint_only)
        rows.append(ConvergenceRow(q.dt, dz, err, bound(dz) if bound is not None else float("nan"), float("nan")))
        rows[-1].slope_cum = fit_slope([r.delta_z for r in rows], [r.l1_error for r in rows])
    return ConvergenceTable(rows, reference_dt, trajs)
