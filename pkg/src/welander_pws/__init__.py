"""Planar Filippov systems and the bifurcations of Welander's convection model."""

from .core import (
    TOL_H,
    Event,
    EventKind,
    KnownEquilibrium,
    Params,
    PwsSystem,
    RegionLabel,
    State,
    Trajectory,
    eval_field,
    region_of,
)
from .exceptions import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    IntegrationError,
    SlidingEncountered,
    TangencyError,
)
from .filippov import (
    IntegratorOptions,
    ManifoldPointClass,
    SlidePolicy,
    SlidingAnalysis,
    analyze_sliding,
    classify_manifold_point,
    integrate,
    normal_projection,
    sliding_lambda,
    sliding_region_bounds,
    sliding_stability_sign,
    sliding_vector_field,
)
from .nonsmooth import (
    BifurcationRecord,
    DiagramRow,
    HomoclinicReport,
    PeriodicOrbitRecord,
    PseudoEquilibrium,
    ReturnMapSample,
    bifurcation_diagram,
    crossing_interval,
    detect_border_collisions,
    epsilon_of_pseudo_x,
    find_periodic_orbit,
    find_pseudoequilibria,
    fused_focus_check,
    homoclinic_family,
    pseudoeq_condition,
    return_map,
    verify_homoclinic,
)
from .smooth import (
    LimitStudyRow,
    SmoothEquilibrium,
    SmoothOrbit,
    find_smooth_orbits,
    hopf_scan,
    limit_study,
    simulate_smooth,
    smooth_equilibrium,
    smooth_return_map,
    snpo_locate,
)
from .welander import (
    EPSILON_0,
    EquilibriumInfo,
    OriginalState,
    SmoothSystem,
    border_collision_epsilons,
    branch_equilibrium,
    build_nonsmooth,
    build_smooth,
    coordinate_change,
    inverse_coordinate_change,
)

__version__ = "0.1.0"
