"""Spatially dependent wild bootstrap for the mean of high-dimensional spatial data."""

from ._linalg import FactorizationError
from .bootstrap import (
    BootstrapDraws,
    CovEstimate,
    MultiplierField,
    SdwbConfig,
    bootstrap_max_stats,
    bootstrap_quantile,
    pseudo_observations,
    sdwb_cov,
    simulate_multiplier_field,
)
from .experiments import (
    CoverageTable,
    StudyConfig,
    coverage_study,
    fwer_study,
    make_dgp,
    power_study,
    variance_consistency_check,
)
from .fields import (
    BoundedUniformJumps,
    CompoundPoissonMA,
    FactorModel,
    FieldSample,
    GaussianMatern,
    StandardNormalJumps,
    simulate,
    simulate_cp_ma,
    simulate_factor,
    simulate_gaussian_field,
    theoretical_moments,
)
from .inference import (
    JointCI,
    StepdownResult,
    joint_ci,
    limit_cov_oracle,
    segments_from_rejections,
    stack_adjacent_differences,
    stepdown_changepoint,
)
from .io import RunConfig, SpatioTemporalPanel, ingest_panel, panel_to_field
from .kernels import (
    BARTLETT,
    PARZEN,
    ExpKernelSum,
    MaternSpec,
    TaperKernel,
    carma21_kernel,
    carma21_varsigma,
    carma_kernel,
    matern_cov,
    psd_check,
    taper_eval,
)
from .sampling import (
    PiecewiseConstant,
    SamplingDesign,
    SiteSet,
    Uniform,
    generate_sites,
    pairwise_distances,
)

__all__ = [
    "BARTLETT",
    "PARZEN",
    "bootstrap_max_stats",
    "bootstrap_quantile",
    "BootstrapDraws",
    "BoundedUniformJumps",
    "carma21_kernel",
    "carma21_varsigma",
    "carma_kernel",
    "CompoundPoissonMA",
    "coverage_study",
    "CoverageTable",
    "CovEstimate",
    "ExpKernelSum",
    "FactorizationError",
    "FactorModel",
    "FieldSample",
    "fwer_study",
    "GaussianMatern",
    "generate_sites",
    "ingest_panel",
    "joint_ci",
    "JointCI",
    "limit_cov_oracle",
    "make_dgp",
    "matern_cov",
    "MaternSpec",
    "MultiplierField",
    "pairwise_distances",
    "panel_to_field",
    "PiecewiseConstant",
    "power_study",
    "psd_check",
    "pseudo_observations",
    "RunConfig",
    "SamplingDesign",
    "sdwb_cov",
    "SdwbConfig",
    "segments_from_rejections",
    "simulate",
    "simulate_cp_ma",
    "simulate_factor",
    "simulate_gaussian_field",
    "simulate_multiplier_field",
    "SiteSet",
    "SpatioTemporalPanel",
    "stack_adjacent_differences",
    "StandardNormalJumps",
    "stepdown_changepoint",
    "StepdownResult",
    "StudyConfig",
    "taper_eval",
    "TaperKernel",
    "theoretical_moments",
    "Uniform",
    "variance_consistency_check",
]

__version__ = "0.1.0"
