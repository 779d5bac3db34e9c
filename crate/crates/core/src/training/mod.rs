//! Objective, gradients and the training loop.

pub mod data;
pub mod fe;
pub mod loss;
pub mod model;
pub mod objective;
pub mod optim;
pub mod train;

pub use data::{Batch, Dataset, DatasetSplits};
pub use fe::{fe_forward, DenseGrad, DenseLayer, FeatureExtractor, Nonlinearity};
pub use loss::{loss_ce, softmax};
pub use model::{accuracy_of, argmax_rows, Head, Model, ParamSlot};
pub use objective::{gradients, objective, Gradients, ObjectiveValue};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use train::{
    pretrain_feature_extractor, train, EpochRecord, TrainConfig, TrainMode, TrainOutcome,
    TrainTrace, TRACE_HEADER,
};
