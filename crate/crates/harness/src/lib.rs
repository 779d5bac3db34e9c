//! Experiment orchestration for gated domain units: configuration, ERM
//! baselines, result files, the Pareto brute-force check and embedding export.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod pareto;
pub mod sweep;

pub use config::{BasisInit, ExperimentConfig, Method, SigmaChoice};
pub use error::{HarnessError, Result};
pub use experiment::{
    erm_ensemble, erm_single, gdu, load_data, run_experiment, run_method, ExperimentResult, MethodRun,
    RunRecord,
};
pub use export::export_embeddings;
pub use pareto::{pareto_check, LinearHypothesis, Loss, ParetoReport};
