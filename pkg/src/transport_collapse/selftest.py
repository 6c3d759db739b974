"""Small invariant suites runnable from the command line."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fluxes import HomogeneousFlux, InhomogeneousFlux
from .homogeneous import run_homogeneous, stream_homogeneous, tc_step
from .inhomogeneous import CharacteristicFlow, flow_diagnostics, run_inhomogeneous, solve_characteristics
from .kinetic import (
    ScalarField,
    SpatialGrid,
    VelocityGrid,
    bv_identity_check,
    collapse,
    defect_from_collapse,
    l1_distance,
    lift,
    step_field,
)
from .oracles import bgk_run, godunov_run, riemann_field
from .paths import PathSpec, TimePartition, delta_z, generate, generate_for_partition, reverse


@dataclass
class Check:
    suite: str
    name: str
    value: float
    limit: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.limit)

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.suite}.{self.name}: {self.value:.3e} (limit {self.limit:.0e})"


def _random_field(rng, grid, vgrid) -> ScalarField:
    eta = min(-vgrid.xi_min, vgrid.xi_max)
    return ScalarField(grid, rng.uniform(-eta, eta, grid.shape))


def kinetic_suite(rng) -> list[Check]:
    g = SpatialGrid(64, 1.0)
    vg = VelocityGrid.symmetric(1.0, 40)
    u, v = _random_field(rng, g, vg), _random_field(rng, g, vg)
    fu, fv = lift(u, vg), lift(v, vg)
    flux = HomogeneousFlux.burgers()
    f = stream_homogeneous(fu, flux, 0.3)
    m, _ = defect_from_collapse(f)
    lat = step_field(g, [0.2, 0.5, 0.8], np.array([2, -3, 1, 0]) * vg.dxi)
    lhs, rhs = bv_identity_check(lat, vg)
    return [
        Check("kinetic", "round_trip", float(np.abs(collapse(fu).values - u.values).max()), 1e-12),
        Check("kinetic", "idempotence", float(np.abs(lift(collapse(fu), vg).values - fu.values).max()), 1e-12),
        Check("kinetic", "collapse_contraction", l1_distance(collapse(f), collapse(fv)) - f.l1_distance(fv), 1e-12),
        Check("kinetic", "lift_sign", fu.sign_violation(), 1e-12),
        Check("kinetic", "defect_negativity", max(-m.min(), 0.0), 1e-12),
        Check("kinetic", "bv_identity", abs(lhs - rhs), 1e-10),
    ]


def paths_suite(rng) -> list[Check]:
    z = generate(PathSpec("brownian", seed=int(rng.integers(1 << 30))), 1.0, 257)
    s, t, u = np.sort(rng.uniform(0, 1, 3))
    add = np.abs(z.increment(s, u) - z.increment(s, t) - z.increment(t, u)).max()
    back = reverse(reverse(z, 0.75), 0.75)
    r = z.restrict(0.75)
    inv = float(max(np.abs(back.times - r.times).max(), np.abs(back.values - r.values).max()))
    grow = delta_z(z, TimePartition(1.0, 16)) - delta_z(z, TimePartition(1.0, 8))
    return [
        Check("paths", "increment_additivity", float(add), 1e-12),
        Check("paths", "reverse_involution", inv, 0.0),
        Check("paths", "delta_z_refinement", max(grow, 0.0), 0.0),
    ]


def homogeneous_suite(rng) -> list[Check]:
    g = SpatialGrid(128, 2.0)
    vg = VelocityGrid.symmetric(1.0, 64)
    flux = HomogeneousFlux.polynomial(rng.normal(size=4))
    u, v = _random_field(rng, g, vg), _random_field(rng, g, vg)
    p = TimePartition(0.5, 10)
    z = generate_for_partition(PathSpec("brownian", seed=int(rng.integers(1 << 30))), p)
    tu = run_homogeneous(u, flux, vg, z, p, p.times)
    tv = run_homogeneous(v, flux, vg, z, p, p.times)
    dist = [l1_distance(tu.snapshots[t], tv.snapshots[t]) for t in sorted(tu.snapshots)]
    mp = max(max(s.max - u.max, u.min - s.min) for s in tu.snapshots.values())
    return [
        Check("homogeneous", "mass_drift", tu.diagnostics["mass_drift"], 1e-12),
        Check("homogeneous", "l1_contraction", max(np.diff(dist).max(), 0.0), 1e-12),
        Check("homogeneous", "maximum_principle", max(mp, 0.0), 1e-12),
        Check("homogeneous", "defect_budget", tu.cumulative_defect - tu.diagnostics["half_l2_squared"], 1e-8),
        Check("homogeneous", "defect_negativity", max(-min(tu.defect_min), 0.0), 1e-12),
    ]


def inhomogeneous_suite(rng) -> list[Check]:
    flux = InhomogeneousFlux.sine_speed()
    z = generate(PathSpec("deterministic"), 0.5, 11)
    x = rng.uniform(0, 2 * np.pi, (1, 32))
    xi = rng.uniform(-1, 1, 32)
    d = flow_diagnostics(CharacteristicFlow(flux, z, 0.01), x, xi, 0.5, 0.1)
    X, Xi = solve_characteristics(CharacteristicFlow(flux, z, 1e-3), x, xi, 0.5, 0.5)
    drift = float(np.abs(flux.flux(X, Xi) - flux.flux(x, xi)).max())

    g = SpatialGrid(128, 2.0, -0.5)
    vg = VelocityGrid.symmetric(1.5, 96)
    u0 = step_field(g, [0.0, 1.0], [0.0, 1.0, 0.0])
    p = TimePartition(0.2, 4)
    zb = generate_for_partition(PathSpec("brownian", seed=3), p)
    a = run_inhomogeneous(u0, HomogeneousFlux.burgers().as_inhomogeneous(), vg, zb, p).final
    b = run_homogeneous(u0, HomogeneousFlux.burgers(), vg, zb, p).final
    tol = 2 * (g.dx[0] + vg.dxi) * p.K
    return [
        Check("inhomogeneous", "det_jacobian", d.max_det_deviation, 1e-5),
        Check("inhomogeneous", "sign_violations", float(d.n_sign_violations), 0.0),
        Check("inhomogeneous", "inverse_composition", d.max_inverse_defect, 1e-7),
        Check("inhomogeneous", "hamiltonian_drift", drift, 1e-6),
        Check("inhomogeneous", "homogeneous_reduction", l1_distance(a, b) / tol, 1.0),
    ]


def oracles_suite(rng) -> list[Check]:
    g = SpatialGrid(256, 2.0)
    vg = VelocityGrid.symmetric(1.0, 64)
    flux = HomogeneousFlux.burgers()
    u0 = riemann_field(g, 1.0, 0.0, 1.0)
    gd = godunov_run(u0, flux, 0.25, g.dx[0])
    p = TimePartition(0.25, 5)
    z = generate(PathSpec("deterministic"), 0.25, 2)
    same = bgk_run(u0, flux, vg, z, p, 1e-300).values - run_homogeneous(u0, flux, vg, z, p).final.values
    return [
        Check("oracles", "godunov_mass", abs(gd.mass() - u0.mass()), 1e-12),
        Check("oracles", "godunov_max_principle", max(gd.max - 1.0, -gd.min, 0.0), 1e-12),
        Check("oracles", "bgk_stiff_limit", float(np.abs(same).max()), 0.0),
    ]


SUITES: dict[str, Callable] = {
    "kinetic": kinetic_suite,
    "paths": paths_suite,
    "homogeneous": homogeneous_suite,
    "inhomogeneous": inhomogeneous_suite,
    "oracles": oracles_suite,
}


def run_selftest(seed: int = 0, suites=None) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks: list[Check] = []
    for name in suites or SUITES:
        checks.extend(SUITES[name](rng))
    return checks
