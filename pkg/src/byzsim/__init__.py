"""Byzantine attack/defense simulator for federated learning."""

from .aggregation import (
    AggregationRule,
    RuleKind,
    agg_bulyan,
    agg_krum,
    agg_mean,
    agg_median,
    agg_trimmed_mean,
    bulyan_select,
    krum_select,
)
from .attacks import (
    AdversaryKnowledge,
    AttackKind,
    AttackSpec,
    Perturbation,
    Visibility,
    adversary_select_attack,
    attack_fang,
    attack_gaussian,
    attack_label_flip,
    attack_lie,
    attack_she,
)
from .config import ExperimentConfig, config_from_dict, load_config
from .defense import DefenseMode, DefenseStrategy, defend_round, sample_rule, weighted_probs
from .learning import (
    Architecture,
    Dataset,
    Model,
    ModelSpec,
    MomentumState,
    compute_trusted_update,
    dirichlet_partition,
    evaluate,
    gradient,
    local_train,
    synth_dataset,
)
from .simulation import (
    MetricsLog,
    RoundRecord,
    SimulationState,
    negative_impact,
    run_experiment,
    run_round,
    sweep,
)
from .theory import (
    RobustnessEstimate,
    TheoryInputs,
    empirical_alpha,
    impact_comparison,
    theorem1_check,
    theorem2_bound,
    theorem2_eta,
)
from .validation import AggregationError, ConfigError, SimulationError, ValidationError

__version__ = "0.1.0"
