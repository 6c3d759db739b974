"""Acceptance criteria AC-1 to AC-10, one pass/fail line each at the stated tolerances."""
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from transport_collapse.fluxes import HomogeneousFlux, InhomogeneousFlux
from transport_collapse.homogeneous import run_homogeneous, tc_step, theorem_bound
from transport_collapse.inhomogeneous import (
    CharacteristicFlow,
    flow_diagnostics,
    run_inhomogeneous,
    solve_characteristics,
)
from transport_collapse.kinetic import (
    ScalarField,
    SpatialGrid,
    VelocityGrid,
    bv_identity_check,
    l1_distance,
    step_field,
)
from transport_collapse.oracles import (
    bgk_run,
    godunov_run,
    riemann_field,
    riemann_l1_error,
    self_convergence_study,
)
from transport_collapse.paths import DriverPath, PathSpec, TimePartition, generate, generate_for_partition

pytestmark = pytest.mark.slow

BURGERS = HomogeneousFlux.burgers()
T = 0.5
DTS = [1 / 50, 1 / 100, 1 / 200, 1 / 400]


def record(key: str, ok: bool, detail: str) -> None:
    line = f"{key} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    assert ok, line


def fmt(xs) -> str:
    return "[" + ", ".join(f"{x:.4g}" for x in xs) + "]"


def decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


@pytest.fixture(scope="module")
def shock_grids():
    # dx = dxi = 1/512; the jump sits mid-domain so the wrap wave stays off the error window
    g = SpatialGrid((1024,), (2.0,))
    vg = VelocityGrid.symmetric(1.0, 1024)
    return g, vg


def riemann_study(g, vg, ul, ur):
    u0 = riemann_field(g, ul, ur, 1.0)
    z = generate(PathSpec("deterministic"), T, 2)
    return self_convergence_study(
        lambda p, s: run_homogeneous(u0, BURGERS, vg, z, p, s), T, DTS, DTS[-1], z,
        exact=lambda u, t: riemann_l1_error(u, ul, ur, 1.0, t),
    )


def test_ac1_shock(shock_grids):
    table = riemann_study(*shock_grids, 1.0, 0.0)
    errs, slope = table.column("l1_error"), table.slope_in_dt()
    ok = decreasing(errs) and errs[-1] <= 0.05 and slope >= 0.4
    record("AC-1", ok, f"errors {fmt(errs)} decreasing={decreasing(errs)} final<=0.05 slope_dt={slope:.3f}>=0.4")


def test_ac2_rarefaction(shock_grids):
    table = riemann_study(*shock_grids, 0.0, 1.0)
    errs, slope = table.column("l1_error"), table.slope_in_dt()
    ok = errs[-1] <= 0.03 and slope >= 0.4
    record("AC-2", ok, f"errors {fmt(errs)} final={errs[-1]:.4g}<=0.03 slope_dt={slope:.3f}>=0.4")


def test_ac3_rough_path_envelope():
    g = SpatialGrid((512,), (2.0,), (-0.5,))
    vg = VelocityGrid.symmetric(1.0, 256)
    u0 = step_field(g, [0.0, 1.0], [0.0, 1.0, 0.0])
    oks, parts = [], []
    for kind in ("brownian", "zigzag"):
        z = generate(PathSpec(kind, seed=0, period=T / 8, amplitude=0.3), T, 3201)
        table = self_convergence_study(
            lambda p, s: run_homogeneous(u0, BURGERS, vg, z, p, s), T, [T / 25, T / 50, T / 100, T / 200], T / 800, z,
            bound=lambda dz: theorem_bound(u0, BURGERS, dz, variant="max"),
        )
        errs, bounds = table.column("l1_error"), table.column("bound")
        within = all(e <= b for e, b in zip(errs, bounds))
        oks.append(within and table.slope >= 0.4)
        parts.append(f"{kind}: errors {fmt(errs)} bounds {fmt(bounds)} within={within} slope_dz={table.slope:.3f}>=0.4")
    record("AC-3", all(oks), " | ".join(parts))


def random_field(rng, n):
    g = SpatialGrid((n,), (1.0,))
    k = rng.integers(1, 6)
    breaks = np.sort(rng.uniform(0, 1, k))
    return step_field(g, breaks, rng.uniform(-1, 1, k + 1))


def random_flux(rng):
    coef = rng.normal(size=rng.integers(2, 5))
    return HomogeneousFlux.polynomial(coef)


def test_ac4_defect_laws():
    rng = np.random.default_rng(4)
    vg = VelocityGrid.symmetric(1.0, 64)
    lowest, triples = 0.0, 0
    for _ in range(200):
        u = random_field(rng, int(rng.integers(16, 96)))
        _, m = tc_step(u, random_flux(rng), vg, rng.normal(scale=0.5))
        lowest = min(lowest, m.min())
        triples += 1
    worst_excess = -np.inf
    for _ in range(20):
        u = random_field(rng, 128)
        flux = random_flux(rng)
        z = generate(PathSpec("brownian", seed=int(rng.integers(1 << 30))), T, 401)
        tr = run_homogeneous(u, flux, vg, z, TimePartition(T, 50))
        lowest = min(lowest, min(tr.defect_min))
        worst_excess = max(worst_excess, tr.cumulative_defect - 0.5 * u.norm(2) ** 2)
    ok = triples >= 100 and lowest >= -1e-12 and worst_excess <= 1e-8
    record("AC-4", ok, f"{triples} triples + 20 runs: min defect {lowest:.3g}>=-1e-12, max(cum - |u0|^2/2) {worst_excess:.3g}<=1e-8")


def test_ac5_conservation_contraction():
    rng = np.random.default_rng(5)
    vg = VelocityGrid.symmetric(1.0, 64)
    drift = growth = overshoot = 0.0
    for _ in range(20):
        u, w = random_field(rng, 128), random_field(rng, 128)
        flux = random_flux(rng)
        z = generate(PathSpec("brownian", seed=int(rng.integers(1 << 30))), T, 401)
        p = TimePartition(T, 50)
        zk = z(p.times)
        lo, hi = u.min, u.max
        m0 = u.mass()
        d = l1_distance(u, w)
        for k in range(p.K):
            u, _ = tc_step(u, flux, vg, zk[k + 1] - zk[k], k)
            w, _ = tc_step(w, flux, vg, zk[k + 1] - zk[k], k)
            d_new = l1_distance(u, w)
            growth = max(growth, d_new - d)
            overshoot = max(overshoot, u.max - hi, lo - u.min)
            d = d_new
        drift = max(drift, abs(u.mass() - m0) / max(abs(m0), np.abs(u.values).sum() * u.grid.cell_volume, 1e-300))
    ok = drift <= 1e-12 and growth <= 1e-12 and overshoot <= 1e-12
    record("AC-5", ok, f"mass drift {drift:.3g}, L1 growth {growth:.3g}, range overshoot {overshoot:.3g} (all <=1e-12)")


def test_ac6_flow_diagnostics():
    flux = InhomogeneousFlux.sine_speed()
    rng = np.random.default_rng(6)
    x = rng.uniform(-np.pi, np.pi, 200)[None]
    xi = rng.uniform(-1.5, 1.5, 200)
    paths = [generate(PathSpec("deterministic"), 1.0, 11), generate(PathSpec("brownian", seed=6), 1.0, 1025)]
    det = sign = inv = ham = 0.0
    for z in paths:
        for t1 in (0.1, 0.55, 1.0):
            flow = CharacteristicFlow(flux, z)
            d = flow_diagnostics(flow, x, xi, t1, 0.1)
            det, inv = max(det, d.max_det_deviation), max(inv, d.max_inverse_defect)
            sign += d.n_sign_violations
            X, Xi = solve_characteristics(flow, x, xi, t1, 0.1)
            H = lambda a, b: (1 + 0.5 * np.sin(a)) * b**2 / 2
            ham = max(ham, float(np.abs(H(X[0], Xi) - H(x[0], xi)).max()))
    ok = det <= 1e-5 and ham <= 1e-6 and sign == 0 and inv <= 1e-7
    record("AC-6", ok, f"|detJ-1| {det:.3g}<=1e-5, H drift {ham:.3g}<=1e-6, sign violations {int(sign)}, inverse {inv:.3g}<=1e-7")


def test_ac7_inhomogeneous():
    # V == 1 against the homogeneous scheme
    g = SpatialGrid((256,), (2.0,), (-0.5,))
    vg = VelocityGrid.symmetric(1.5, 384)
    u0 = step_field(g, [0.0, 1.0], [0.0, 1.0, 0.0])
    z = generate(PathSpec("brownian", seed=0), T, 401)
    p = TimePartition(T, 25)
    a = run_inhomogeneous(u0, BURGERS.as_inhomogeneous(), vg, z, p)
    b = run_homogeneous(u0, BURGERS, vg, z, p)
    gap, allowance = l1_distance(a.final, b.final), 2 * (g.dx[0] + vg.dxi) * p.K
    # V(x) = 1 + 0.5 sin x on a 2 pi periodic domain, errors at T against T/800
    g2 = SpatialGrid((512,), (2 * np.pi,))
    vg2 = VelocityGrid.symmetric(1.5, 192)
    u2 = step_field(g2, [2.0, 3.0], [0.0, 1.0, 0.0])
    flux = InhomogeneousFlux.sine_speed()
    z2 = generate_for_partition(PathSpec("brownian", seed=0), TimePartition(T, 800))
    ref = run_inhomogeneous(u2, flux, vg2, z2, TimePartition(T, 800)).final
    errs = [l1_distance(run_inhomogeneous(u2, flux, vg2, z2, TimePartition(T, K)).final, ref) for K in (25, 50, 100, 200)]
    ok = gap <= allowance and decreasing(errs)
    record("AC-7", ok, f"V=1 gap {gap:.3g}<={allowance:.3g}; sine-speed errors {fmt(errs)} decreasing={decreasing(errs)}")


def test_ac8_bgk(shock_grids):
    g, vg = shock_grids
    u0 = riemann_field(g, 1.0, 0.0, 1.0)
    z = generate(PathSpec("deterministic"), T, 2)
    gaps = []
    for dt in (DTS[0], DTS[-1]):
        p = TimePartition.from_dt(T, dt)
        ref = run_homogeneous(u0, BURGERS, vg, z, p).final
        gaps.append(l1_distance(bgk_run(u0, BURGERS, vg, z, p, p.dt / 100), ref))
    ok = max(gaps) <= 1e-3
    record("AC-8", ok, f"L1(bgk, tc) at dt=1/50, 1/400: {fmt(gaps)} <= 1e-3")


def test_ac9_bv_identity():
    rng = np.random.default_rng(9)
    worst, cases = 0.0, 0
    for _ in range(200):
        n = int(rng.integers(8, 200))
        g = SpatialGrid((n,), (float(rng.uniform(0.5, 5.0)),))
        k = int(rng.integers(1, 8))
        cuts = np.sort(rng.choice(np.arange(1, n), size=min(k, n - 1), replace=False))
        levels = rng.uniform(-1, 1, cuts.size + 1)
        vals = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [n]])))
        bound = float(np.abs(vals).max())
        vg = VelocityGrid.symmetric(bound * float(rng.uniform(1.0, 2.0)), 2 * int(rng.integers(4, 64)))
        lhs, rhs = bv_identity_check(ScalarField(g, vals), vg)
        worst = max(worst, abs(lhs - rhs))
        cases += 1
    ok = worst <= 1e-10
    record("AC-9", ok, f"{cases} random step functions: max |lhs - rhs| {worst:.3g}<=1e-10")


def test_ac10_time_change(shock_grids):
    g, vg = shock_grids
    u0 = riemann_field(g, 1.0, 0.0, 1.0)
    z = DriverPath([0.0, 0.2, 0.35, 0.5], [0.0, 0.1, 0.4, 0.55])
    tr = run_homogeneous(u0, BURGERS, vg, z, TimePartition(T, 100))
    tau = float(z(T)[0] - z(0.0)[0])
    other = godunov_run(u0, BURGERS, tau, 0.5 * g.dx[0])
    gap = l1_distance(tr.final, other)
    record("AC-10", gap <= 0.05, f"L1(run at T, godunov at tau={tau:g}) {gap:.3g}<=0.05 at dx=1/512")
