//! Losses, optimizer, models, training loops, evaluation metrics and
//! checkpoint persistence.

mod adam;
mod checkpoint;
mod export;
mod fd;
mod loss;
mod metrics;
mod model;
mod tasks;

pub use adam::{adam_update, OptimizerState};
pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, Checkpoint, SegmentValues,
    CHECKPOINT_VERSION,
};
pub use export::{
    confusion_csv, energy_csv, history_csv, parse_history_csv, trajectory_csv, write_text, HISTORY_HEADER,
    TRAJECTORY_HEADER,
};
pub use fd::{fd_gradient_oracle, relative_error, FD_EPS};
pub use loss::{batch_cross_entropy, intensity_cross_entropy, softmax_cross_entropy, trajectory_mse};
pub use metrics::{argmax, metrics_from_intensities, EpochRecord, Metrics, MetricsBuilder};
pub use model::{ALPHA_MAX, Backend, CompiledModel, DpuConfig, MeshInit, Model, ModelConfig, ModelMode, Tape};
pub use tasks::{
    classification_gradient, epoch_seed, evaluate, predict_trajectory, train_classification, train_trajectory,
    trajectory_gradient, ClassificationReport, ClassificationSet, Curriculum, Placement, TrainConfig, TrajectoryReport,
};
