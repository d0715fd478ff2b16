"""latpat: lateral-inhibition pattern analysis on cell-contact graphs.

Certifies the monotonicity structure of a per-cell model, predicts
instability of the homogeneous network state and existence/stability of
checkerboard patterns on bipartite contact graphs, and confirms the
predictions by direct simulation.
"""

from .analysis import (
    CheckerboardPair,
    HomogeneousState,
    ModeEigenvalues,
    PeriodTwoOrbit,
    StabilityVerdict,
    build_checkerboard,
    checkerboard_block_reduction,
    checkerboard_network_jacobian,
    checkerboard_stability_test,
    find_homogeneous_fixed_point,
    find_period_two,
    homogeneous_network_jacobian,
    instability_test,
    is_hurwitz,
    mode_eigenvalues,
    spectral_radius,
    verify_period_two,
)
from .graphs import (
    Bipartition,
    ContactGraph,
    RandomWalkSpectrum,
    bipartition,
    build_graph,
    cartesian_product,
    complete_bipartite,
    cycle_graph,
    grid_graph,
    path_graph,
    random_walk_matrix,
    read_edge_list,
    spectrum,
    write_edge_list,
)
from .models import (
    BoxDomain,
    CellModel,
    Characteristic,
    ConstantStage,
    HillParams,
    HillStage,
    LinearStage,
    cascade_model,
    notch_mimo_model,
    notch_restricted_domain,
)
from .monotone import (
    AssumptionReport,
    IncidenceGraph,
    SignPattern,
    assumption_report,
    build_incidence_graph,
    certify_sign_pattern,
    excitability_transparency,
)
from .sim import (
    EnsembleStats,
    PatternReferences,
    SimulationResult,
    ensemble_converge,
    integrate,
    integrate_cell,
    network_rhs,
    order_preservation_check,
    perturbed_homogeneous_start,
)
from .tolerances import Tolerances

__version__ = "0.1.0"
