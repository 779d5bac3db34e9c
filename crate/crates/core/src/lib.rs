//! Gated domain units: kernel mean embeddings, a gated ensemble layer over
//! learned elementary domain bases, its regularizers and a training loop.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below name the common instantiations.

pub mod checkpoint;
pub mod datagen;
pub mod error;
pub mod heuristics;
pub mod kernel;
pub mod kv;
pub mod layer;
pub mod regularization;
pub mod rkhs;
pub mod scalar;
pub mod training;

pub use error::{GduError, Result};
pub use kernel::{gaussian_kernel, gram, median_heuristic, KernelConfig};
pub use layer::{
    basis_init_std, kernel_softmax, Activation, DomainBasis, GatingMode, GatingWeights, GduLayer,
    LayerShape, LearningMachine, INIT_CROSS_KERNEL_TARGET,
};
pub use regularization::{
    gram_bases, omega_l1, omega_ols, omega_orth, omega_parts, omega_total, spectral_norm_sym,
    OmegaParts, OrthVariant, RegConfig,
};
pub use rkhs::{kme_inner, kme_norm_sq, mmd_sq, rkhs_cosine, EmpiricalKme};
pub use scalar::Scalar;
pub use training::{
    fe_forward, gradients, loss_ce, objective, pretrain_feature_extractor, train, Batch, Dataset,
    DatasetSplits, FeatureExtractor, Gradients, Head, Model, Nonlinearity, ObjectiveValue,
    OptimizerConfig, OptimizerKind, TrainConfig, TrainMode, TrainOutcome, TrainTrace,
};

pub type KernelConfigF64 = KernelConfig<f64>;
pub type EmpiricalKmeF64 = EmpiricalKme<f64>;
pub type GduLayerF64 = GduLayer<f64>;
pub type RegConfigF64 = RegConfig<f64>;
pub type DatasetF64 = Dataset<f64>;
pub type ModelF64 = Model<f64>;
pub type TrainConfigF64 = TrainConfig<f64>;

pub type KernelConfigF32 = KernelConfig<f32>;
pub type EmpiricalKmeF32 = EmpiricalKme<f32>;
pub type GduLayerF32 = GduLayer<f32>;
pub type RegConfigF32 = RegConfig<f32>;
pub type DatasetF32 = Dataset<f32>;
pub type ModelF32 = Model<f32>;
pub type TrainConfigF32 = TrainConfig<f32>;
