//! Chronological training with t-batches, truncated backpropagation at batch
//! boundaries and adaptive-moment updates; gradient checking.

mod adam;
mod config;
mod fit;
mod gradcheck;
mod grid;
mod tbatch;

pub use adam::Adam;
pub use config::TrainConfig;
pub use fit::{
    dims_for, fit, fit_from, replay, write_epoch_log, EntityKind, EpochLog, Replay, TrainOutcome, TrajectoryPoint,
};
pub use gradcheck::{analytic_gradient, grad_check, grad_check_with, random_instance, GradCheckReport};
pub use grid::{grid_search, GridPoint, GridResult, GridSpec, DEFAULT_DECAYS, DEFAULT_DIMS};
pub use tbatch::{t_batch, TBatch};

pub use crate::model::Ablation;
