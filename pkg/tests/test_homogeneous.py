import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from transport_collapse.fluxes import HomogeneousFlux
from transport_collapse.homogeneous import (
    run_homogeneous,
    shift_axis,
    stream_homogeneous,
    tc_step,
    theorem_bound,
    theorem_bounds,
)
from transport_collapse.kinetic import (
    KineticDensity,
    ScalarField,
    SpatialGrid,
    VelocityGrid,
    VelocityRangeError,
    defect_from_collapse,
    l1_distance,
    lift,
    step_field,
)
from transport_collapse.paths import DriverPath, PathSpec, TimePartition, generate

BURGERS = HomogeneousFlux.burgers()


def indicator(n=256, length=2.0, origin=-0.5):
    g = SpatialGrid((n,), (length,), (origin,))
    return step_field(g, [0.0, 1.0], [0.0, 1.0, 0.0])


# ---------------------------------------------------------------- streaming

def test_stream_zero_increment_is_identity():
    g = SpatialGrid((8,), (1.0,))
    vg = VelocityGrid.symmetric(1.0, 8)
    f = lift(ScalarField(g, np.linspace(-0.9, 0.9, 8)), vg)
    np.testing.assert_array_equal(stream_homogeneous(f, BURGERS, 0.0).values, f.values)


def test_half_cell_shift_splits_evenly():
    vals = np.array([0.0, 1.0, 0.0, 0.0])[:, None]
    np.testing.assert_allclose(shift_axis(vals, np.array([0.5]), 0)[:, 0], [0, 0.5, 0.5, 0])


def test_burgers_zero_speed_cell_stays_put():
    g = SpatialGrid((8,), (8.0,))
    vg = VelocityGrid(-1.0, 1.0, 4)  # midpoints -0.75, -0.25, 0.25, 0.75
    vals = np.zeros((8, 4))
    vals[2] = 1.0
    out = stream_homogeneous(KineticDensity(g, vg, vals), BURGERS, 2.0).values
    np.testing.assert_allclose(out[2:4, 2], [0.5, 0.5])  # 0.25 * 2 = half a cell
    np.testing.assert_allclose(out[1:3, 1], [0.5, 0.5])
    np.testing.assert_allclose(out[3:5, 3], [0.5, 0.5])  # 1.5 cells


def test_linear_flux_integer_shift_is_exact_translation():
    g = SpatialGrid((16,), (1.0,))
    vg = VelocityGrid.symmetric(1.0, 4)
    f = lift(ScalarField(g, np.random.default_rng(0).uniform(-1, 1, 16)), vg)
    out = stream_homogeneous(f, HomogeneousFlux.linear([2.0]), 3 / 32)
    np.testing.assert_array_equal(out.values, np.roll(f.values, 3, axis=0))


@given(st.floats(-20, 20), st.integers(0, 100))
def test_remap_conserves_and_contracts(s, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, 1, (2, 12, 3))
    shifts = np.array([s, -s, 0.3 * s])
    sa, sb = shift_axis(a, shifts, 0), shift_axis(b, shifts, 0)
    np.testing.assert_allclose(sa.sum(axis=0), a.sum(axis=0), rtol=1e-12)
    assert sa.min() >= 0.0
    assert np.abs(sa - sb).sum() <= np.abs(a - b).sum() * (1 + 1e-12)


def test_two_dimensional_stream_conserves_per_cell():
    g = SpatialGrid((6, 5), (1.0, 1.0))
    vg = VelocityGrid.symmetric(1.0, 4)
    u = ScalarField(g, np.random.default_rng(3).uniform(-1, 1, (6, 5)))
    f = lift(u, vg)
    out = stream_homogeneous(f, HomogeneousFlux.burgers(2), [0.13, -0.41])
    np.testing.assert_allclose(out.values.sum(axis=(0, 1)), f.values.sum(axis=(0, 1)), rtol=1e-12)


# ---------------------------------------------------------------- tc_step

def test_tc_step_zero_increment_is_identity():
    u = indicator(64)
    vg = VelocityGrid.symmetric(1.0, 64)
    v, m = tc_step(u, BURGERS, vg, 0.0)
    np.testing.assert_array_equal(v.values, u.values)
    assert m.total_mass() == 0.0


def test_tc_step_constant_stays_constant():
    g = SpatialGrid((32,), (1.0,))
    vg = VelocityGrid.symmetric(1.0, 32)
    u = ScalarField(g, np.full(32, 0.37))
    v, _ = tc_step(u, BURGERS, vg, 0.31)
    np.testing.assert_allclose(v.values, 0.37, rtol=1e-13)


def test_tc_step_matches_lift_stream_collapse():
    u = indicator(64)
    vg = VelocityGrid.symmetric(1.0, 32)
    v, m = tc_step(u, BURGERS, vg, 0.2)
    m2, v2 = defect_from_collapse(stream_homogeneous(lift(u, vg), BURGERS, 0.2))
    np.testing.assert_allclose(v.values, v2.values, atol=1e-14)
    np.testing.assert_allclose(m.values, m2.values, atol=1e-13)


def test_tc_step_value_on_rarefaction_front():
    # u(x) = |{xi in [0, 1] : 0 <= x - xi/4 <= 1}| = 0.5 at x = 1.125
    n = 256
    g = SpatialGrid((2 * n,), (2.0,), (-0.5,))
    u = step_field(g, [0.0, 1.0], [0.0, 1.0, 0.0])
    vg = VelocityGrid.symmetric(1.0, 2 * n)
    v, _ = tc_step(u, BURGERS, vg, 0.25)
    x = g.centers(0)
    j = np.argmin(np.abs(x - 1.125))
    assert abs(np.interp(1.125, x, v.values) - 0.5) <= 0.02
    assert abs(v.values[j] - 0.5) <= 0.02


def test_tc_step_range_error():
    u = indicator(32)
    with pytest.raises(VelocityRangeError):
        tc_step(u, BURGERS, VelocityGrid.symmetric(0.5, 8), 0.1)


fields = st.lists(st.floats(-1, 1), min_size=8, max_size=8)


@given(fields, st.floats(-2, 2))
def test_tc_step_mass_and_maximum_principle(vals, dz):
    g = SpatialGrid((8,), (1.0,))
    vg = VelocityGrid.symmetric(1.0, 16)
    u = ScalarField(g, np.array(vals))
    v, m = tc_step(u, BURGERS, vg, dz)
    assert abs(v.mass() - u.mass()) <= 1e-12 * max(1.0, np.abs(u.values).sum())
    assert u.min - 1e-12 <= v.min and v.max <= u.max + 1e-12
    assert m.min() >= -1e-12


@given(fields, fields, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_l1_contraction_along_steps(a, b, dzs):
    g = SpatialGrid((8,), (1.0,))
    vg = VelocityGrid.symmetric(1.0, 16)
    u, w = ScalarField(g, np.array(a)), ScalarField(g, np.array(b))
    d = l1_distance(u, w)
    for dz in dzs:
        u, _ = tc_step(u, BURGERS, vg, dz)
        w, _ = tc_step(w, BURGERS, vg, dz)
        d_new = l1_distance(u, w)
        assert d_new <= d + 1e-12
        d = d_new


# ---------------------------------------------------------------- run

def test_constant_path_leaves_data_unchanged():
    u = indicator(64)
    vg = VelocityGrid.symmetric(1.0, 32)
    z = DriverPath([0.0, 1.0], [0.3, 0.3])
    tr = run_homogeneous(u, BURGERS, vg, z, TimePartition(1.0, 10), [0.5, 1.0])
    np.testing.assert_array_equal(tr.final.values, u.values)
    assert tr.cumulative_defect == 0.0


def test_zigzag_integer_shifts_return_exactly():
    # amplitude 0.25 = 8 cells at speed 1, so every step moves whole cells
    g = SpatialGrid((64,), (2.0,))
    u = ScalarField(g, np.random.default_rng(5).uniform(-1, 1, 64))
    vg = VelocityGrid.symmetric(1.0, 8)
    z = generate(PathSpec("zigzag", period=1.0, amplitude=0.25), 2.0, 9)
    tr = run_homogeneous(u, HomogeneousFlux.linear([1.0]), vg, z, TimePartition(2.0, 8))
    assert np.abs(tr.final.values - u.values).max() <= 1e-12


def test_zigzag_fractional_shifts_return_within_remap_diffusion():
    g = SpatialGrid((128,), (2.0,))
    u = step_field(g, [0.5, 1.2], [0.0, 1.0, 0.0])
    vg = VelocityGrid.symmetric(1.0, 8)
    z = generate(PathSpec("zigzag", period=1.0, amplitude=0.1), 2.0, 9)
    tr = run_homogeneous(u, HomogeneousFlux.linear([1.0]), vg, z, TimePartition(2.0, 8))
    assert l1_distance(tr.final, u) <= 0.1


def test_run_records_defect_within_energy():
    u = indicator(128)
    vg = VelocityGrid.symmetric(1.0, 64)
    z = generate(PathSpec("brownian", seed=2), 0.5, 201)
    tr = run_homogeneous(u, BURGERS, vg, z, TimePartition(0.5, 50), [0.1, 0.5])
    assert sorted(tr.snapshots) == [0.1, 0.5]
    assert tr.cumulative_defect <= 0.5 * u.norm(2) ** 2 + 1e-8
    assert tr.diagnostics["defect_within_energy"]
    assert tr.diagnostics["mass_drift"] <= 1e-12
    assert min(tr.defect_min) >= -1e-14
    assert len(tr.norms["l1"]) == 51
    assert max(tr.norms["linf"]) <= 1.0 + 1e-12


def test_run_rejects_off_partition_snapshot():
    u = indicator(32)
    vg = VelocityGrid.symmetric(1.0, 16)
    z = generate(PathSpec("deterministic"), 0.5, 3)
    with pytest.raises(ValueError):
        run_homogeneous(u, BURGERS, vg, z, TimePartition(0.5, 25), [0.25])


def test_run_warns_on_narrow_velocity_grid():
    u = indicator(32)
    z = generate(PathSpec("deterministic"), 0.5, 3)
    with pytest.warns(UserWarning):
        with pytest.raises(VelocityRangeError):
            run_homogeneous(u, BURGERS, VelocityGrid.symmetric(0.5, 8), z, TimePartition(0.5, 5))


# ---------------------------------------------------------------- bound

def test_bound_examples():
    zero = ScalarField(SpatialGrid((16,), (2.0,)), np.zeros(16))
    assert theorem_bound(zero, BURGERS, 0.01) == 0.0
    u = indicator(256)
    assert theorem_bound(u, BURGERS, 0.01) == pytest.approx(np.sqrt(8) * 0.1, rel=1e-12)


@given(st.floats(1e-6, 1e-2), st.floats(1.0, 50.0))
def test_bound_scales_with_root_dz(dz, lam):
    u = indicator(64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert theorem_bound(u, BURGERS, lam * dz) == pytest.approx(np.sqrt(lam) * theorem_bound(u, BURGERS, dz), rel=1e-12)


def test_bound_variants_and_warning():
    u = indicator(64)
    b = theorem_bounds(u, BURGERS, 0.01)
    assert b["optimized"] == pytest.approx(2 * np.sqrt(2 * 2 * 1) * 1 * 0.1)
    assert theorem_bound(u, BURGERS, 0.01, variant="max") == max(b.values())
    with pytest.warns(UserWarning):
        theorem_bound(u, BURGERS, 2.0)
