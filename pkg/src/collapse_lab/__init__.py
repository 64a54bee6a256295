"""Exact and asymptotic predictive-collapse diagnostics for constrained
finite-alphabet models."""

__version__ = "0.1.0"

from .model import (
    ConstrainedModel,
    FeasibilityReport,
    TypeVector,
    empirical_measure,
    feasibility_check,
    model_from_dict,
    model_to_dict,
    validate_model,
)
from .projection import Projection, dual_newton, kl_divergence, project, tilted_distribution
from .curvature import (
    CurvatureReport,
    LanfordWindow,
    SensitivityReport,
    TemperResult,
    curvature_report,
    lanford_radius,
    min_eigenvalue,
    perturbation_stability,
    projected_hessian,
    sample_size_plan,
    spectral_bounds,
    tangent_basis,
    temper,
    window_member,
)
from .oracle import (
    CollapseBoundInputs,
    HypergeometricCheck,
    LanfordFixedPoint,
    PredictiveLaw,
    TypeEnsemble,
    WindowMass,
    collapse_bound,
    enumerate_types,
    feasible_types,
    gaussian_mixture_approx,
    hypergeometric_bound_check,
    lanford_fixed_point,
    predictive_exact,
    product_law,
    quadratic_residual,
    tv_distance,
    type_count,
    window_partition,
    without_replacement_law,
)
from .betel import (
    ConcentrationProfile,
    GridPosterior,
    PseudoTrue,
    TiltedFamily,
    betel_posterior,
    betel_predictive,
    build_family,
    concentration_profile,
    pseudo_true,
)
from .moments import (
    ComparabilityReport,
    GeeCurvature,
    GmmWeight,
    curvature_comparability,
    gee_curvature,
    gmm_objective,
    gmm_weight,
)
from .harness import (
    CellResult,
    ExperimentConfig,
    ExperimentResult,
    RateFit,
    SkippedCell,
    collapse_cell,
    rate_fit,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
