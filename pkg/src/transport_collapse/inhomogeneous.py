"""Backward characteristics and the semi-Lagrangian step for x-dependent fluxes.

Between two samples of the driver the characteristic system

    dX_i = a_i(X, Xi) dz_i,    dXi = -sum_i b_i(X, Xi) dz_i

is an autonomous ODE scaled by the (constant) slope of ``z``.  It is
integrated with classical RK4 in the segment's increment parameter, with the
substep size bounded by ``h`` in driver units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fluxes import InhomogeneousFlux
from .homogeneous import Trajectory, _snapshot_indices
from .kinetic import (
    DefectMeasure,
    ScalarField,
    VelocityGrid,
    VelocityRangeError,
    check_range,
    checked_defect,
    defect_edge_values,
)
from .paths import DriverPath, TimePartition, align, reverse


class CharacteristicBlowUp(RuntimeError):
    pass


@dataclass(frozen=True)
class CharacteristicFlow:
    flux: InhomogeneousFlux
    path: DriverPath
    h: float = 0.025
    direction: str = "backward"

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("integrator step must be positive")
        if self.direction not in ("backward", "forward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.path.dim != self.flux.dimension:
            raise ValueError("path and flux dimensions differ")

    def with_direction(self, direction: str) -> "CharacteristicFlow":
        return CharacteristicFlow(self.flux, self.path, self.h, direction)


def _rk4_segment(flux: InhomogeneousFlux, X: np.ndarray, Xi: np.ndarray, dz: np.ndarray, h: float):
    """Integrate over one linear piece with total increment ``dz``."""
    n_sub = max(1, math.ceil(float(np.linalg.norm(dz)) / h))
    step = dz / n_sub
    col = step.reshape((-1,) + (1,) * (X.ndim - 1))

    def rhs(x, xi):
        a, b = flux.characteristic_field(x, xi)
        a *= col
        b *= col
        return a, -b.sum(axis=0)

    for _ in range(n_sub):
        k1x, k1e = rhs(X, Xi)
        k2x, k2e = rhs(X + 0.5 * k1x, Xi + 0.5 * k1e)
        k3x, k3e = rhs(X + 0.5 * k2x, Xi + 0.5 * k2e)
        k4x, k4e = rhs(X + k3x, Xi + k3e)
        X = X + (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
        Xi = Xi + (k1e + 2 * k2e + 2 * k3e + k4e) / 6.0
    return X, Xi


def _increments(flow: CharacteristicFlow, t1: float, t: float) -> list[np.ndarray]:
    if not 0.0 <= t <= t1 <= flow.path.T * (1 + 1e-12):
        raise ValueError(f"need 0 <= t <= t1 <= T, got t={t}, t1={t1}")
    if t == 0.0:
        return []
    if flow.direction == "backward":
        zr = reverse(flow.path, t1)
        pts = [0.0] + [b for _, b in zr.segments(0.0, t)]
        vals = zr(np.asarray(pts))
    else:
        pts = [t1 - t] + [b for _, b in flow.path.segments(t1 - t, t1)]
        vals = flow.path(np.asarray(pts))
    incs = list(np.diff(vals, axis=0))
    if flow.flux.dimension == 1:
        # flows of a single autonomous field compose additively in the driver
        return [np.sum(incs, axis=0)]
    return incs


def solve_characteristics(flow: CharacteristicFlow, x, xi, t1: float, t: float):
    """Trace ``(x, xi)`` along the flow for elapsed time ``t`` starting at ``t1``.

    Backward: driven by ``z(t1 - s)`` for ``s`` in ``[0, t]``.  Forward: driven
    by ``z`` on ``[t1 - t, t1]``, which inverts the backward map.  ``x`` has the
    axis first, shape ``(N, ...)``; ``xi`` has the trailing shape.
    """
    N = flow.flux.dimension
    X = np.array(x, dtype=float).reshape((N,) + np.shape(xi))
    Xi = np.array(xi, dtype=float)
    for dz in _increments(flow, t1, t):
        X, Xi = _rk4_segment(flow.flux, X, Xi, dz, flow.h)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Xi))):
            raise CharacteristicBlowUp(f"characteristics diverged within elapsed time {t}")
    return X, Xi


@dataclass
class FlowDiagnostics:
    max_det_deviation: float
    max_sign_violation: float
    n_sign_violations: int
    max_inverse_defect: float


def flow_diagnostics(flow: CharacteristicFlow, x, xi, t1: float, t: float, spacing: float = 1e-5) -> FlowDiagnostics:
    """Volume, sign and invertibility checks at the sample points ``(x, xi)``."""
    N = flow.flux.dimension
    x = np.asarray(x, dtype=float).reshape(N, -1)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    back = flow.with_direction("backward")
    X, Xi = solve_characteristics(back, x, xi, t1, t)

    J = np.empty((xi.size, N + 1, N + 1))
    for c in range(N + 1):
        dx = np.zeros_like(x)
        dxi = np.zeros_like(xi)
        if c < N:
            dx[c] = spacing
        else:
            dxi[:] = spacing
        Xp, Xip = solve_characteristics(back, x + dx, xi + dxi, t1, t)
        Xm, Xim = solve_characteristics(back, x - dx, xi - dxi, t1, t)
        J[:, :N, c] = ((Xp - Xm) / (2 * spacing)).T
        J[:, N, c] = (Xip - Xim) / (2 * spacing)
    det_dev = float(np.abs(np.linalg.det(J) - 1.0).max())

    s = np.sign(xi)
    violation = np.where(s == 0, np.abs(Xi), np.maximum(-s * Xi, 0.0))
    mismatched = int(np.count_nonzero(np.sign(Xi) != s))

    Y, Z = solve_characteristics(flow.with_direction("forward"), X, Xi, t1, t)
    inv = float(max(np.abs(Y - x).max(), np.abs(Z - xi).max()))
    return FlowDiagnostics(det_dev, float(violation.max(initial=0.0)), mismatched, inv)


def interpolate_periodic(u: ScalarField, points: np.ndarray) -> np.ndarray:
    """Multilinear periodic interpolation of cell-centre values at ``points`` (axis first)."""
    g = u.grid
    vals = u.values
    out = np.zeros(points.shape[1:])
    idx, wts = [], []
    for ax in range(g.dimension):
        s = (points[ax] - g.origin[ax]) / g.dx[ax] - 0.5
        i0 = np.floor(s)
        w = s - i0
        i0 = i0.astype(np.intp) % g.cells[ax]
        idx.append((i0, (i0 + 1) % g.cells[ax]))
        wts.append((1.0 - w, w))
    for corner in np.ndindex(*(2,) * g.dimension):
        weight = np.ones_like(out)
        ind = []
        for ax, c in enumerate(corner):
            weight = weight * wts[ax][c]
            ind.append(idx[ax][c])
        out += weight * vals[tuple(ind)]
    return out


def pre_collapse_density(
    u: ScalarField,
    flux: InhomogeneousFlux,
    vgrid: VelocityGrid,
    z: DriverPath,
    t_k: float,
    t_next: float,
    h: float = 0.025,
) -> np.ndarray:
    """Cell averages of the transported equilibrium of ``u`` just before ``t_next``.

    Backward characteristics are traced from every (x-centre, xi-edge) node.
    The density in a cell is the average of the equilibrium of ``u``
    (interpolated at the mid foot point) over the traced xi-interval.
    """
    check_range(u, vgrid)
    g = u.grid
    N = g.dimension
    f = np.zeros(g.shape + (vgrid.n_cells,))
    # Xi keeps the sign of xi, so a side of zero with no data stays empty
    i0 = vgrid.zero_edge
    first = i0 if u.min >= 0.0 else 0
    last = i0 if u.max <= 0.0 else vgrid.n_cells
    if last <= first:
        return f
    edges = vgrid.edges[first : last + 1]
    pos = vgrid.positive[first:last]

    mesh = g.mesh()
    x0 = np.broadcast_to(mesh[..., None], mesh.shape + (edges.size,))
    xi0 = np.broadcast_to(edges, g.shape + (edges.size,))
    flow = CharacteristicFlow(flux, z, h)
    X, Xi = solve_characteristics(flow, x0, xi0, t_next, t_next - t_k)

    # sign preservation holds up to integrator error; keep each cell on its side
    Xi = np.where(edges >= 0, np.maximum(Xi, 0.0), np.minimum(Xi, 0.0))
    Xi[..., edges == 0.0] = 0.0
    lo = np.minimum(Xi[..., :-1], Xi[..., 1:])
    hi = np.maximum(Xi[..., :-1], Xi[..., 1:])
    u_foot = interpolate_periodic(u, 0.5 * (X[..., :-1] + X[..., 1:]).reshape(N, -1)).reshape(lo.shape)

    top = hi[..., -1]
    bottom = lo[..., 0]
    if np.any(u_foot[..., -1] > top + 1e-12) or np.any(u_foot[..., 0] < bottom - 1e-12):
        need_hi = float(np.max(u_foot[..., -1] - top, initial=0.0))
        need_lo = float(np.min(u_foot[..., 0] - bottom, initial=0.0))
        raise VelocityRangeError(
            "xi-images leave the velocity grid",
            suggested=(vgrid.xi_min + need_lo - vgrid.dxi, vgrid.xi_max + need_hi + vgrid.dxi),
        )

    width = hi - lo
    safe = np.where(width > 0, width, 1.0)
    cell_lo = np.where(pos, np.maximum(lo, 0.0), lo)
    cell_hi = np.where(pos, hi, np.minimum(hi, 0.0))
    # degenerate cells stay empty
    overlap = np.where(width > 0, _signed_overlap(u_foot, cell_lo, cell_hi, pos), 0.0)
    f[..., first:last] = overlap / safe
    return f


def sl_step(
    u: ScalarField,
    flux: InhomogeneousFlux,
    vgrid: VelocityGrid,
    z: DriverPath,
    t_k: float,
    t_next: float,
    h: float = 0.025,
    k: int = 0,
) -> tuple[ScalarField, DefectMeasure]:
    """Semi-Lagrangian transport-collapse step from ``t_k`` to ``t_next``."""
    f = pre_collapse_density(u, flux, vgrid, z, t_k, t_next, h)
    m, u_next = defect_edge_values(f, vgrid.lower, vgrid.upper, vgrid.dxi)
    return ScalarField(u.grid, u_next), checked_defect(u.grid, vgrid, k, m)


def _signed_overlap(u, lo, hi, positive):
    clipped = np.clip(u, lo, hi)
    return np.where(positive, clipped - lo, clipped - hi)


@dataclass
class InhomogeneousTrajectory(Trajectory):
    kinetic_mass: list[float] = field(default_factory=list)
    tightness: list[float] = field(default_factory=list)
    vgrid: VelocityGrid | None = None


def mass_outside_ball(u: ScalarField, radius: float) -> float:
    g = u.grid
    centre = np.array([o + 0.5 * L for o, L in zip(g.origin, g.length)])
    r = np.sqrt(((g.mesh() - centre.reshape((-1,) + (1,) * g.dimension)) ** 2).sum(axis=0))
    return float(np.abs(u.values[r > radius]).sum() * g.cell_volume)


def default_velocity_grid(u0: ScalarField, dxi: float, margin: float = 1.5) -> VelocityGrid:
    bound = max(u0.norm(np.inf), dxi) * margin
    return VelocityGrid.from_spacing(-bound, bound, dxi)


def run_inhomogeneous(
    u0: ScalarField,
    flux: InhomogeneousFlux,
    vgrid: VelocityGrid,
    z: DriverPath,
    p: TimePartition,
    snapshot_times: Sequence[float] = (),
    h: float = 0.025,
    tightness_radius: float | None = None,
    max_widenings: int = 8,
) -> InhomogeneousTrajectory:
    """Iterate ``sl_step`` over ``p``; the velocity grid is widened by 1.5x on demand."""
    z = align(z, p)
    times = p.times
    want = _snapshot_indices(p, snapshot_times)
    radius = tightness_radius if tightness_radius is not None else 0.375 * min(u0.grid.length)
    traj = InhomogeneousTrajectory(p, u0, u0)
    traj.record(u0)
    traj.kinetic_mass.append(u0.norm(1))
    traj.tightness.append(mass_outside_ball(u0, radius))
    if 0 in want:
        traj.snapshots[want[0]] = u0
    u = u0
    widenings = 0
    for k in range(p.K):
        while True:
            try:
                f = pre_collapse_density(u, flux, vgrid, z, times[k], times[k + 1], h)
                break
            except VelocityRangeError as err:
                widenings += 1
                if widenings > max_widenings:
                    raise
                lo, hi = err.suggested
                vgrid = vgrid.widened(min(lo, 1.5 * vgrid.xi_min), max(hi, 1.5 * vgrid.xi_max))
        m_vals, u_vals = defect_edge_values(f, vgrid.lower, vgrid.upper, vgrid.dxi)
        m = checked_defect(u.grid, vgrid, k, m_vals)
        f_mass = float(np.abs(f).sum() * vgrid.dxi * u.grid.cell_volume)
        u = ScalarField(u.grid, u_vals)
        traj.defect_mass.append(m.total_mass())
        traj.defect_min.append(m.min())
        traj.kinetic_mass.append(f_mass)
        traj.tightness.append(mass_outside_ball(u, radius))
        traj.record(u)
        if k + 1 in want:
            traj.snapshots[want[k + 1]] = u
    traj.final = u
    traj.vgrid = vgrid
    energy = 0.5 * u0.norm(2) ** 2
    l1_0 = u0.norm(1)
    traj.diagnostics.update(
        half_l2_squared=energy,
        widenings=widenings,
        defect_excess_ratio=(traj.cumulative_defect - energy) / l1_0 if l1_0 > 0 else 0.0,
        max_l1_growth=float(max(traj.norms["l1"]) - l1_0),
        # transported kinetic mass against the field norm it started from
        max_kinetic_growth=float(max(np.subtract(traj.kinetic_mass[1:], traj.norms["l1"][:-1]), default=0.0)),
    )
    return traj
