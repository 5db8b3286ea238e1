"""Weakly-supervised anomaly detection by ordinal regression over
random instance pairs, with a two-stream shared-weight scorer and
ensemble pair scoring."""

__version__ = "0.1.0"

from .dataset import (
    LabeledDataset,
    WeakSupervisionSplit,
    build_weak_supervision,
    load_csv,
    save_csv,
    standardize,
    standardize_split,
    stratified_split,
)
from .engine import (
    TrainConfig,
    TrainReport,
    score_dataset,
    score_instance,
    train,
)
from .harness import (
    ExperimentSpec,
    SyntheticSpec,
    generate_synthetic,
    run_ablation_suite,
    run_contamination_sweep,
    run_experiment,
)
from .metrics import (
    AggregateReport,
    MetricsReport,
    aggregate_runs,
    auc_pr,
    auc_roc,
    evaluate,
)
from .model import (
    Model,
    ModelConfig,
    OptimizerState,
    PReNetParams,
    VARIANTS,
    batch_gradients,
    batch_objective,
    build_variant,
    forward_pair,
    forward_pairs,
    load_checkpoint,
    pair_loss,
    rmsprop_step,
    save_checkpoint,
)
from .ndcore import finite_diff_grad, glorot_uniform, make_rng, matmul, relu
from .pairgen import (
    InstanceBatch,
    OrdinalLabels,
    PairBatch,
    PairClass,
    expected_scores,
    expected_true_relation_proportions,
    mislabel_fraction,
    sample_instance_batch,
    sample_pair_batch,
    training_pair_space_size,
)

__all__ = [name for name in dir() if not name.startswith("_")]
