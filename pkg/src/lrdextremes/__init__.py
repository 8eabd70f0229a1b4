"""Extreme-value sums of subordinated long-range dependent moving averages.

Simulation, exact scaling constants, order-statistic functionals, and a
Monte Carlo harness verifying the asymptotic normality of normalized
extreme sums at desk scale.
"""

from .config import ExperimentConfig, build_problem, parse_config, serialize_config
from .errors import (
    ClampWarning,
    ConfigError,
    DomainError,
    FitError,
    InfeasibleConfigError,
    LrdExtremesError,
    NumericError,
    StateError,
    TruncationWarning,
)
from .estats import (
    Decomposition,
    ProcessFrame,
    alpha_n,
    decompose_I,
    hh_partial_sum_sup,
    i3_direct,
    multilinear_Y,
    quantile_process,
    reduction_sup,
    tail_alpha_sup,
    top_k_sum,
    trimmed_sum,
    u_ratio,
    z_statistic,
)
from .mc import (
    McRunResult,
    ReplicateResult,
    convergence_study,
    ks_test,
    run_replicates,
    summarize,
    trend_nonincreasing,
)
from .model import (
    CoefficientModel,
    EmpiricalMarginal,
    ExponentialTarget,
    GaussianMarginal,
    IdentityTarget,
    InnovationDist,
    LogParetoTarget,
    MarginalX,
    MdaCase,
    MdaTag,
    ParetoMarginal,
    ParetoTarget,
    SlowlyVaryingFn,
    SvConstant,
    SvLogPower,
    SvNumeric,
    SvRatio,
    SvScaled,
    TargetMarginalY,
    clamp_events,
    fit_empirical_marginal,
    marginal_eval,
    reset_clamp_events,
    subordinate,
    sv_eval,
)
from .scaling import (
    LFamily,
    ScalingBundle,
    big_A,
    centering,
    check_condition_Dr,
    d_np,
    iid_contrast,
    iid_scale,
    karamata_K,
    karamata_product,
    make_bundle,
    power_rank_integral,
    select_p,
    sigma_np_asymptotic,
    xi_threshold,
)
from .simulate import (
    PathPair,
    autocovariance,
    autocovariance_model,
    autocovariances,
    build_coefficient_model,
    derive_seed,
    dump_path_binary,
    dump_path_csv,
    gen_innovations,
    load_path_binary,
    moving_average,
    sigma_n1_exact,
    simulate_path,
    truncation_length,
)

__version__ = "0.1.0"
