"""robopt: differentially private and heavy-tailed-robust first-order
optimization, with synthetic benchmarks and a scenario harness."""

from .data_synth import (
    CovSpec,
    Dataset,
    NoiseSpec,
    gen_linear_heavy_tailed,
    gen_logistic_glm,
    gen_separable,
    sample_truncated_normal,
)
from .losses import (
    CurvatureReport,
    DomainBounds,
    LossModel,
    curvature_constants,
    empirical_value_and_gradient,
    per_sample_gradient,
    population_oracle_linear,
)
from .optimizers import (
    AllSpace,
    ExactMean,
    GmomEstimator,
    L2Ball,
    NoisedMean,
    OptimizerConfig,
    Trajectory,
    lmo_l2_ball,
    project_l2_ball,
    run_dp_sgd,
    run_fw,
    run_nesterov,
    run_pgd,
    split_chunks,
    stability_constants,
)
from .privacy import (
    PrivacyRegimeError,
    PrivacySpec,
    compose_advanced,
    fw_noise_variance,
    gaussian_sigma2,
    gradient_mean_sensitivity,
    per_step_budget,
)
from .robust_mean import GmomConfig, bucket_count, geometric_median, gmom_estimate, psi
from .scenarios import (
    ResultTable,
    ScenarioSpec,
    export_csv,
    fit_log_slope,
    get_scenario,
    run_cell,
    run_scenario,
    scenario_catalog,
)

__version__ = "0.1.0"
