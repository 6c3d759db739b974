"""Grids, fields, the Maxwellian lift/collapse pair and the collapse-time defect.

Kinetic densities are stored as cell averages over the (x, xi) product grid.
The xi-integral of the equilibrium profile over a cell is evaluated in closed
form, so ``collapse(lift(u)) == u`` up to rounding and mass is conserved
exactly by every scheme built on top of these operations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# identities exact by construction
EXACT_TOL = 1e-12
# a defect value below this means the streaming step is broken
DEFECT_ABORT_TOL = 1e-8


class VelocityRangeError(ValueError):
    """The velocity grid does not cover the values being lifted."""

    def __init__(self, message: str, suggested: tuple[float, float] | None = None):
        super().__init__(message)
        self.suggested = suggested


class DefectNegativityError(RuntimeError):
    pass


class GridMismatchError(ValueError):
    pass


def _as_tuple(v, n: int | None = None) -> tuple:
    if np.ndim(v) == 0:
        v = (v,) * (n or 1)
    return tuple(v)


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic cell-centred grid on ``[origin, origin + length)`` per axis."""

    cells: tuple[int, ...]
    length: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        cells = tuple(int(c) for c in _as_tuple(self.cells))
        length = tuple(float(v) for v in _as_tuple(self.length, len(cells)))
        origin = self.origin
        origin = (0.0,) * len(cells) if origin is None else tuple(float(v) for v in _as_tuple(origin, len(cells)))
        if len(cells) not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {len(cells)}")
        if len(length) != len(cells) or len(origin) != len(cells):
            raise ValueError("cells, length and origin must have one entry per axis")
        if any(c <= 0 for c in cells):
            raise ValueError(f"cells_per_axis must be positive, got {cells}")
        if any(not np.isfinite(v) or v <= 0 for v in length):
            raise ValueError(f"domain_length must be positive, got {length}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "origin", origin)

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.length, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def edges(self, axis: int = 0) -> np.ndarray:
        n = self.cells[axis]
        return self.origin[axis] + self.dx[axis] * np.arange(n + 1)

    def centers(self, axis: int = 0) -> np.ndarray:
        n = self.cells[axis]
        return self.origin[axis] + self.dx[axis] * (np.arange(n) + 0.5)

    def mesh(self) -> np.ndarray:
        """Cell centres as an array of shape ``(dimension, *shape)``."""
        axes = [self.centers(i) for i in range(self.dimension)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform xi-grid on ``[xi_min, xi_max]`` with an edge exactly at zero."""

    xi_min: float
    xi_max: float
    n_cells: int
    edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi, n = float(self.xi_min), float(self.xi_max), int(self.n_cells)
        if not (lo < 0 < hi):
            raise ValueError(f"need xi_min < 0 < xi_max, got [{lo}, {hi}]")
        if n <= 0:
            raise ValueError("n_cells must be positive")
        dxi = (hi - lo) / n
        i0 = -lo / dxi
        if abs(i0 - round(i0)) > 1e-9:
            raise ValueError(f"xi = 0 is not a cell edge of [{lo}, {hi}] with {n} cells")
        i0 = int(round(i0))
        # edges built on the integer lattice so that 0 is represented exactly
        edges = dxi * (np.arange(n + 1) - i0)
        object.__setattr__(self, "xi_min", float(edges[0]))
        object.__setattr__(self, "xi_max", float(edges[-1]))
        object.__setattr__(self, "n_cells", n)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def symmetric(cls, bound: float, n_cells: int) -> "VelocityGrid":
        if n_cells % 2:
            raise ValueError("a symmetric grid needs an even number of cells")
        return cls(-bound, bound, n_cells)

    @classmethod
    def from_spacing(cls, lo: float, hi: float, dxi: float) -> "VelocityGrid":
        """Smallest lattice grid of spacing ``dxi`` containing ``[lo, hi]``."""
        n_neg = max(1, int(np.ceil(-min(lo, 0.0) / dxi - 1e-9)))
        n_pos = max(1, int(np.ceil(max(hi, 0.0) / dxi - 1e-9)))
        return cls(-n_neg * dxi, n_pos * dxi, n_neg + n_pos)

    @property
    def dxi(self) -> float:
        return (self.xi_max - self.xi_min) / self.n_cells

    @property
    def lower(self) -> np.ndarray:
        return self.edges[:-1]

    @property
    def upper(self) -> np.ndarray:
        return self.edges[1:]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def zero_edge(self) -> int:
        return int(np.flatnonzero(self.edges == 0.0)[0])

    @property
    def positive(self) -> np.ndarray:
        """Boolean mask of cells lying in xi > 0."""
        return self.lower >= 0.0

    def covers(self, lo: float, hi: float) -> bool:
        return self.xi_min <= lo and hi <= self.xi_max

    def widened(self, lo: float, hi: float) -> "VelocityGrid":
        """Same spacing, extended so that ``[lo, hi]`` is covered."""
        return VelocityGrid.from_spacing(min(lo, self.xi_min), max(hi, self.xi_max), self.dxi)


@dataclass(frozen=True)
class ScalarField:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: SpatialGrid, fn) -> "ScalarField":
        return cls(grid, fn(*grid.mesh()))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def norm(self, p: float = 1) -> float:
        if p == np.inf:
            return float(np.abs(self.values).max())
        return float((np.abs(self.values) ** p).sum() * self.grid.cell_volume) ** (1.0 / p)

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class KineticDensity:
    """Cell averages of a kinetic density, shape ``sgrid.shape + (n_xi,)``."""

    sgrid: SpatialGrid
    vgrid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = self.sgrid.shape + (self.vgrid.n_cells,)
        if values.shape != expected:
            raise GridMismatchError(f"values shape {values.shape} != {expected}")
        object.__setattr__(self, "values", values)

    def sign_violation(self) -> float:
        """Largest amount by which a cell disagrees with sgn(f) = sgn(xi) or |f| <= 1."""
        pos = self.vgrid.positive
        v = self.values
        bad = np.maximum(np.abs(v) - 1.0, 0.0)
        bad = np.maximum(bad, np.where(pos, -v, v))
        return float(bad.max(initial=0.0))

    def is_valid(self, tol: float = EXACT_TOL) -> bool:
        return bool(np.all(np.isfinite(self.values))) and self.sign_violation() <= tol

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.vgrid.dxi * self.sgrid.cell_volume)

    def l1_distance(self, other: "KineticDensity") -> float:
        _check_same(self.sgrid, other.sgrid)
        if self.vgrid != other.vgrid:
            raise GridMismatchError("velocity grids differ")
        return float(np.abs(self.values - other.values).sum() * self.vgrid.dxi * self.sgrid.cell_volume)


@dataclass(frozen=True)
class DefectMeasure:
    """Collapse-time entropy defect, sampled at xi-edges, shape ``sgrid.shape + (n_xi + 1,)``."""

    sgrid: SpatialGrid
    vgrid: VelocityGrid
    step_index: int
    values: np.ndarray

    def total_mass(self) -> float:
        # piecewise linear between edges and zero at both ends of the xi-range
        m = self.values
        inner = m[..., 1:-1].sum() + 0.5 * (m[..., 0].sum() + m[..., -1].sum())
        return float(inner * self.vgrid.dxi * self.sgrid.cell_volume)

    def min(self) -> float:
        return float(self.values.min())


def maxwellian_value(u, xi):
    """Equilibrium profile: +1 on 0 <= xi <= u, -1 on u <= xi <= 0, else 0.

    Both interval ends are closed; at ``u == xi == 0`` the value is +1.
    """
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    out = np.where((0.0 <= xi) & (xi <= u), 1.0, np.where((u <= xi) & (xi <= 0.0), -1.0, 0.0))
    return float(out) if out.ndim == 0 else out


def chi_cell_integral(u, xi_lo, xi_hi):
    """Exact integral of the equilibrium profile over ``[xi_lo, xi_hi]``.

    The cell must lie on one side of zero; the result is the signed length of
    its overlap with ``[0, u]`` (or ``[u, 0]``).
    """
    u = np.asarray(u, dtype=float)
    lo = np.asarray(xi_lo, dtype=float)
    hi = np.asarray(xi_hi, dtype=float)
    if np.any(lo >= hi):
        raise ValueError("need xi_lo < xi_hi")
    if np.any((lo < 0.0) & (hi > 0.0)):
        raise ValueError("cell straddles xi = 0")
    clipped = np.clip(u, lo, hi)
    out = clipped - np.where(lo >= 0.0, lo, hi)
    return float(out) if out.ndim == 0 else out


def check_range(u: ScalarField, vgrid: VelocityGrid) -> None:
    vals = u.values
    if not vals.size:
        return
    lo, hi = float(vals.min()), float(vals.max())
    if lo < vgrid.xi_min or hi > vgrid.xi_max:
        bad = lo if lo < vgrid.xi_min else hi
        raise VelocityRangeError(
            f"u value {bad!r} outside velocity range [{vgrid.xi_min}, {vgrid.xi_max}]",
            suggested=(min(lo, vgrid.xi_min), max(hi, vgrid.xi_max)),
        )


def lift(u: ScalarField, vgrid: VelocityGrid) -> KineticDensity:
    """Cell-averaged Maxwellian of ``u`` on the product grid."""
    check_range(u, vgrid)
    f = chi_cell_integral(u.values[..., None], vgrid.lower, vgrid.upper) / vgrid.dxi
    return KineticDensity(u.grid, vgrid, f)


def collapse(f: KineticDensity) -> ScalarField:
    return ScalarField(f.sgrid, f.values.sum(axis=-1) * f.vgrid.dxi)


def active_cells(vgrid: VelocityGrid, lo: float, hi: float) -> slice:
    """Smallest block of xi-cells, bordered by the zero edge, on which ``chi(u, .)`` can be nonzero
    for ``lo <= u <= hi``."""
    i0 = vgrid.zero_edge
    a = i0 - int(np.ceil(max(-lo, 0.0) / vgrid.dxi - 1e-12))
    b = i0 + int(np.ceil(max(hi, 0.0) / vgrid.dxi - 1e-12))
    return slice(max(a, 0), min(b, vgrid.n_cells))


def defect_edge_values(fvals: np.ndarray, lower: np.ndarray, upper: np.ndarray, dxi: float, anchor_edge: int | None = None):
    """Edge values of the defect and the collapsed field for raw cell averages.

    ``anchor_edge=None`` integrates from the first edge, otherwise the values
    are shifted to vanish at that edge index.
    """
    u = fvals.sum(axis=-1) * dxi
    diff = chi_cell_integral(u[..., None], lower, upper) - fvals * dxi
    m = np.zeros(diff.shape[:-1] + (diff.shape[-1] + 1,))
    np.cumsum(diff, axis=-1, out=m[..., 1:])
    if anchor_edge is None:
        # Mf - f integrates to zero over xi; drop the rounding residue at the top edge
        m[..., -1] = 0.0
    else:
        m -= m[..., anchor_edge : anchor_edge + 1]
    return m, u


def defect_from_collapse(
    f_minus: KineticDensity, k: int = 0, anchor: str = "lower"
) -> tuple[DefectMeasure, ScalarField]:
    """Collapse ``f_minus`` and return the defect it produces at xi-edges.

    ``m(x, e)`` integrates ``Mf - f`` over xi up to the edge ``e``.  With the
    default ``anchor="lower"`` the integral starts at the bottom of the
    velocity grid; this is the nonnegative, compactly supported primitive for
    every density with ``0 <= sgn(xi) f <= 1``.  ``anchor="zero"`` integrates
    outward from ``xi = 0``; the two agree wherever ``f(x, .)`` carries a
    single sign, and differ where positive and negative kinetic mass meet in
    the same cell.

    Raises ``DefectNegativityError`` if any value is below ``-1e-8``.
    """
    if anchor not in ("lower", "zero"):
        raise ValueError(f"unknown anchor {anchor!r}")
    vg = f_minus.vgrid
    m, u = defect_edge_values(
        f_minus.values, vg.lower, vg.upper, vg.dxi, vg.zero_edge if anchor == "zero" else None
    )
    return checked_defect(f_minus.sgrid, vg, k, m), ScalarField(f_minus.sgrid, u)


def checked_defect(sgrid: SpatialGrid, vgrid: VelocityGrid, k: int, m: np.ndarray) -> DefectMeasure:
    lowest = float(m.min(initial=0.0))
    if lowest < -DEFECT_ABORT_TOL:
        raise DefectNegativityError(f"defect value {lowest:.3e} at step {k}; streaming step is broken")
    return DefectMeasure(sgrid, vgrid, k, m)


def _check_same(a: SpatialGrid, b: SpatialGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def l1_distance(u: ScalarField, v: ScalarField) -> float:
    _check_same(u.grid, v.grid)
    return float(np.abs(u.values - v.values).sum() * u.grid.cell_volume)


def bv_norm(u: ScalarField) -> float:
    """Discrete periodic total variation of a 1-D field."""
    if u.grid.dimension != 1:
        raise ValueError("bv_norm is defined for 1-D fields only")
    return float(np.abs(np.roll(u.values, -1) - u.values).sum())


def bv_identity_check(u: ScalarField, vgrid: VelocityGrid) -> tuple[float, float]:
    """Total variation of ``u`` against the xi-integral of the slice variations of its lift."""
    if u.grid.dimension != 1:
        raise ValueError("bv_identity_check is defined for 1-D fields only")
    f = lift(u, vgrid).values
    slices = np.abs(np.roll(f, -1, axis=0) - f).sum(axis=0)
    return bv_norm(u), float((slices * vgrid.dxi).sum())


def step_field(grid: SpatialGrid, breaks: Sequence[float], levels: Sequence[float]) -> ScalarField:
    """Piecewise-constant 1-D field: ``levels[i]`` on ``[breaks[i-1], breaks[i])``."""
    x = grid.centers(0)
    idx = np.searchsorted(np.asarray(breaks, dtype=float), x, side="right")
    return ScalarField(grid, np.asarray(levels, dtype=float)[idx])
