"""rwrelab — a laboratory for transient sub-ballistic random walks in random environment.

The package covers the full pipeline: environment families with tail-exponent
solving (:mod:`rwrelab.envmodel`), potential/valley geometry
(:mod:`rwrelab.potential`), closed-form quenched computations
(:mod:`rwrelab.quenched`), Monte Carlo walkers with exact acceleration
(:mod:`rwrelab.walker`), limit-law reference functions and statistical
experiments (:mod:`rwrelab.experiments`), and a CLI (``rwrelab``).
"""

__version__ = "0.1.0"

from .envmodel import (
    EnvSpec,
    EnvSpecError,
    Environment,
    sample_environment,
    solve_kappa,
    validate_spec,
)
from .experiments import (
    CellResult,
    ExperimentReport,
    arcsine_aging_value,
    clock_model_comparison,
    dynkin_left_cdf,
    dynkin_right_cdf,
    estimate_aging,
    excursion_tail_slope,
    ks_distance,
    localization_rate,
    oracle_battery,
    renewal_test,
    trajectory_batch,
    tv_distance,
    wilson_interval,
)
from .potential import (
    CriticalScales,
    DeepValley,
    DiagnosticsConfig,
    Potential,
    ScanExhaustedError,
    build_potential,
    critical_scales,
    deep_valleys,
    excursion_heights,
    good_env_diagnostics,
    ladder_epochs,
    valley_weight,
)
from .quenched import (
    IntervalProblem,
    chain_oracle,
    escape_prob,
    expected_hit_time_reflected,
    hit_prob,
    invariant_measure,
)
from .walker import (
    WalkConfig,
    clock_model,
    run_levels_only,
    run_trajectory,
    sim_first_passage_nb,
    sim_hitting_time,
    sim_valley_crossing_geometric,
)

__all__ = [
    "__version__",
    # envmodel
    "EnvSpec",
    "EnvSpecError",
    "Environment",
    "sample_environment",
    "solve_kappa",
    "validate_spec",
    # potential
    "CriticalScales",
    "DeepValley",
    "DiagnosticsConfig",
    "Potential",
    "ScanExhaustedError",
    "build_potential",
    "critical_scales",
    "deep_valleys",
    "excursion_heights",
    "good_env_diagnostics",
    "ladder_epochs",
    "valley_weight",
    # quenched
    "IntervalProblem",
    "chain_oracle",
    "escape_prob",
    "expected_hit_time_reflected",
    "hit_prob",
    "invariant_measure",
    # walker
    "WalkConfig",
    "clock_model",
    "run_levels_only",
    "run_trajectory",
    "sim_first_passage_nb",
    "sim_hitting_time",
    "sim_valley_crossing_geometric",
    # experiments
    "CellResult",
    "ExperimentReport",
    "arcsine_aging_value",
    "clock_model_comparison",
    "dynkin_left_cdf",
    "dynkin_right_cdf",
    "estimate_aging",
    "excursion_tail_slope",
    "ks_distance",
    "localization_rate",
    "oracle_battery",
    "renewal_test",
    "trajectory_batch",
    "tv_distance",
    "wilson_interval",
]
