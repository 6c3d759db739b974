"""Transport-collapse schemes for scalar conservation laws with rough fluxes."""

__version__ = "0.1.0"

from .kinetic import (
    DefectMeasure,
    DefectNegativityError,
    GridMismatchError,
    KineticDensity,
    ScalarField,
    SpatialGrid,
    VelocityGrid,
    VelocityRangeError,
    bv_identity_check,
    bv_norm,
    chi_cell_integral,
    collapse,
    defect_from_collapse,
    l1_distance,
    lift,
    maxwellian_value,
    step_field,
)
from .fluxes import HomogeneousFlux, InhomogeneousFlux
from .paths import DriverPath, PathSpec, TimePartition, delta_z, generate, generate_for_partition, reverse
from .homogeneous import Trajectory, run_homogeneous, stream_homogeneous, tc_step, theorem_bound, theorem_bounds
from .inhomogeneous import (
    CharacteristicBlowUp,
    CharacteristicFlow,
    flow_diagnostics,
    run_inhomogeneous,
    sl_step,
    solve_characteristics,
)
from .oracles import (
    CFLError,
    NestingError,
    bgk_run,
    exact_riemann_burgers,
    godunov_run,
    riemann_cell_averages,
    riemann_field,
    self_convergence_study,
)
