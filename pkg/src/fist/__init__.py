"""Feature-importance sampling and tree-based design-flow parameter tuning."""

from .space import (
    Dataset,
    FeatureSpec,
    ParameterSpace,
    Sample,
    SpaceError,
    TableError,
    load_table,
    parse_space,
    space_size,
    space_to_json,
)
from .importance import (
    MaskError,
    aggregate_importance,
    feature_importance,
    importance_mask,
    importance_rank,
)
from .cluster import ApproxLabelStore, Partition, SigmaResult, partition, sigma_analysis
from .model import (
    DepthSchedule,
    GbrtEnsemble,
    ModelError,
    RandomForest,
    RegressionTree,
    fit_forest,
    fit_gbrt,
    fit_tree,
)
from .metrics import (
    adrs,
    cost_to_rank,
    pareto_front,
    rank_of_best,
    summarize_trials,
)
from .explore import (
    STRATEGIES,
    ConfigError,
    EvaluationError,
    LearnerParams,
    RunLog,
    RunRecord,
    TuneConfig,
    run,
)
from .harness import (
    BenchConfig,
    EvaluatorBinding,
    RunlogError,
    SyntheticSpec,
    bench,
    external_evaluate,
    read_runlog,
    runlog_from_jsonl,
    runlog_to_jsonl,
    synth_space,
    write_runlog,
)

__version__ = "0.1.0"
