"""Birth-death accelerated Langevin sampling with a mode-discovering
exploration component, its baselines, benchmark targets, and diagnostics.
"""

from .gaussian import (
    CholeskyFactor,
    EmptyMixture,
    GaussianMixture,
    NotPositiveDefinite,
    cholesky,
    kde_log_density,
    mixture_logpdf,
    mixture_sample,
    mvn_logpdf,
    mvn_sample,
)
from .targets import (
    GaussianMixtureTarget,
    GaussianTarget,
    SkewProductTarget,
    SurTarget,
    TargetDensity,
    TemperedTarget,
    example1_target,
    make_target,
)
from .modes import (
    ModeAtlas,
    ModeInfo,
    NotAMinimum,
    NotConverged,
    default_threshold,
    exploration_step,
    find_mode,
    mode_distance,
    recompute_weights,
)
from .samplers import (
    Ensemble,
    EmptyAtlas,
    SamplerConfig,
    birth_death_step,
    mh_log_acceptance,
    mh_mixture_step,
    run,
    run_baseline,
    run_bdec,
    ula_step,
)
from .diagnostics import (
    DomainError,
    GridTooNarrow,
    RunMetrics,
    chi2_divergence_grid,
    estimate_Z,
    estimate_expectation,
    gaussian_approx_lower_bound,
    gaussian_approx_lower_bound_multimodal,
    marginal_kl,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    PRESETS,
    preset,
    run_experiment,
    run_replicate,
)

__version__ = "0.1.0"
