//! Training orchestration: hyperparameters, SGD, early stopping and
//! checkpoints.

pub mod checkpoint;
pub mod hyper;
pub mod setup;
pub mod sgd;
pub mod trainer;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use hyper::{Hyperparameters, Optimizer};
pub use setup::{build_model, corpus_text, TrainingSentence};
pub use sgd::{sgd_step, sgd_update, SgdTarget};
pub use trainer::{
    anneal_check, compute_gradients, evaluate, train, AnnealDecision, EpochLog, EpochRecord, TrainState,
};
