"""Sharp-interface film energies with adatoms and their diffuse approximation.

The library models a strained thin film as the subgraph of a nonnegative BV
profile carrying an adatom measure on its extended graph. The relaxed sharp
energy couples linear elasticity in the film with surface densities derived
from a coverage-dependent energy psi; the diffuse counterpart replaces the
film indicator by a phase field at thickness eps. Recovery constructions,
constrained minimization, and convergence experiments connect the two.
"""

from .config import (
    ConfigError,
    load_config,
    model_from_config,
    profile_from_config,
    psi_from_config,
    spec_from_config,
    well_from_config,
)
from .elasticity import (
    DisplacementBC,
    ElasticModel,
    ElasticityError,
    SolverError,
    bulk_energy,
    bulk_gradient,
    isotropic_tensor,
    solve_displacement,
    strain_norm_sq,
    voigt_matrix,
)
from .envelopes import (
    EnvelopeError,
    EnvelopeTable,
    SurfaceDensity,
    UnresolvedRecessionError,
    build_envelope_table,
    convexify,
    cut_envelope,
    recession,
    subadditive_envelope,
)
from .geometry import (
    AdatomMeasure,
    AdmissibleCover,
    BVProfile,
    GeometryError,
    GraphDecomposition,
    GraphSegment,
    MeasureSegment,
    Rect,
    check_cover,
    decompose,
    delta_cover,
    grid_constant_project,
    hausdorff_complement,
    rect_masses,
    signed_distance,
    signed_distance_points,
)
from .grids import (
    GridError,
    StripGrid,
    diff_matrices,
    gradient,
    integrate,
    integrate_upper,
    node_weights,
    sym_gradient,
)
from .harness import (
    ConvergenceReport,
    ExperimentSpec,
    HarnessError,
    emit,
    gap_trend_ok,
    loglog_slope,
    report_csv_text,
    run_compactness_monitor,
    run_limsup,
    run_liminf_probe,
)
from .phase_field import (
    DiffuseMeasure,
    DoubleWell,
    MeasureSample,
    MinimizeResult,
    PhaseFieldEnergy,
    PhaseFieldError,
    default_eta,
    diffuse_measure,
    energy_eps,
    extract_profile,
    film_volume,
    minimize_eps,
    modica_density,
    project_mass,
    project_volume,
    sample_rect_masses,
    surface_energy_eps,
    weak_star_distance,
)
from .recovery import (
    BuildUResult,
    BuildWResult,
    OptimalProfile,
    PhaseConfig,
    RecoveryBundle,
    RecoveryError,
    build_u,
    build_v,
    build_w,
    mollify_profile,
    ode_residual,
    optimal_profile,
    recovery_sequence,
)
from .sharp_energy import (
    MassConstraintError,
    SharpEnergy,
    SharpEnergyError,
    bulk_resolution,
    check_mass,
    sharp_bulk_energy,
    sharp_surface_energy,
    sharp_total,
    subgraph_indicator,
    unrelaxed_surface_energy,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
