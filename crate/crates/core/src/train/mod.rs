//! Optimizers, the training loop, evaluation metrics and history export.

mod history;
mod metrics;
mod optim;
mod trainer;

pub use history::{
    export_history, format_table, history_csv, parse_history, read_history, summary_table, HISTORY_HEADER, TRAIN_SPLIT,
    VALIDATION_SPLIT,
};
pub use metrics::{
    argmax, binary_auc, macro_auc_from_slice, macro_ovr_auc, macro_precision_recall_f1, ovr_auc_per_class,
    per_class_scores, ClassScores, ConfusionMatrix, MetricsRow,
};
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use trainer::{evaluate, train, EpochMetrics, Evaluation, History, TrainConfig, Trainer, INIT_STREAM};
