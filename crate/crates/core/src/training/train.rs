//! Mini-batch training with early stopping on validation accuracy.

use std::fmt;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GduError, Result};
use crate::layer::{Activation, LearningMachine};
use crate::regularization::{omega_orth, OrthVariant, RegConfig};
use crate::scalar::Scalar;
use crate::training::data::{Batch, Dataset};
use crate::training::fe::FeatureExtractor;
use crate::training::model::{Head, Model};
use crate::training::objective::evaluate;
use crate::training::optim::{Optimizer, OptimizerConfig, OptimizerKind};

/// `Ft` trains the head on frozen features; `E2e` trains everything jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TrainMode {
    #[default]
    Ft,
    E2e,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Ft => "ft",
            TrainMode::E2e => "e2e",
        })
    }
}

impl FromStr for TrainMode {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ft" => Ok(TrainMode::Ft),
            "e2e" => Ok(TrainMode::E2e),
            other => Err(GduError::InvalidConfig(format!(
                "unknown training mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig<T>,
    pub reg: RegConfig<T>,
    pub track_srip: bool,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            mode: TrainMode::Ft,
            batch_size: 32,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            reg: RegConfig::default(),
            track_srip: false,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(GduError::InvalidConfig(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        if self.patience == 0 || self.patience > self.max_epochs {
            return Err(GduError::InvalidConfig(format!(
                "patience must lie in 1..={}, got {}",
                self.max_epochs, self.patience
            )));
        }
        self.optimizer.validate()?;
        self.reg.validate()
    }

    pub fn learning_rate(&self) -> T {
        self.optimizer.learning_rate
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.kind
    }
}

/// One epoch of the training trace. Loss and regularizers are batch averages
/// over the epoch; `srip` is measured on the bases at the end of the epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
    pub srip: Option<f64>,
    pub omega_ols: f64,
    pub omega_orth: f64,
    pub omega_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
}

pub const TRACE_HEADER: &str = "epoch,loss,val_acc,srip,omega_ols,omega_orth,omega_l1";

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best_val_acc(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.val_acc).reduce(f64::max)
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let srip = r.srip.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.loss, r.val_acc, srip, r.omega_ols, r.omega_orth, r.omega_l1
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    /// Snapshot with the highest validation accuracy.
    pub model: Model<T>,
    pub trace: TrainTrace,
    /// Zero-based epoch of the returned snapshot.
    pub best_epoch: usize,
    pub best_val_acc: f64,
}

fn check_splits<T: Scalar>(
    train: &Dataset<T>,
    validation: &Dataset<T>,
    model: &Model<T>,
) -> Result<()> {
    if train.is_empty() {
        return Err(GduError::Empty("training split"));
    }
    if validation.is_empty() {
        return Err(GduError::Empty("validation split"));
    }
    for d in [train, validation] {
        if d.dim() != model.fe.input_dim() {
            return Err(GduError::DimensionMismatch {
                left: d.dim(),
                right: model.fe.input_dim(),
            });
        }
        if let Some(&y) = d.labels.iter().find(|&&y| y >= model.num_classes()) {
            return Err(GduError::InvalidConfig(format!(
                "label {y} out of range for {} classes",
                model.num_classes()
            )));
        }
    }
    Ok(())
}

/// Trains `model` and returns the best validation snapshot.
///
/// In FT mode the features of both splits are extracted once and only the head
/// is optimized; the returned model carries the original feature extractor.
pub fn train<T: Scalar>(
    train: &Dataset<T>,
    validation: &Dataset<T>,
    cfg: &TrainConfig<T>,
    model: Model<T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_splits(train, validation, &model)?;
    match cfg.mode {
        TrainMode::E2e => run(train, validation, cfg, model),
        TrainMode::Ft => {
            let Model { fe, head } = model;
            let tr = train.with_inputs(fe.forward_batch(train.inputs.view())?);
            let va = validation.with_inputs(fe.forward_batch(validation.inputs.view())?);
            let head_only = Model::new(FeatureExtractor::identity(fe.output_dim()), head)?;
            let mut out = run(&tr, &va, cfg, head_only)?;
            out.model = Model::new(fe, out.model.head)?;
            Ok(out)
        }
    }
}

fn run<T: Scalar>(
    train: &Dataset<T>,
    validation: &Dataset<T>,
    cfg: &TrainConfig<T>,
    mut model: Model<T>,
) -> Result<TrainOutcome<T>> {
    let include_fe = cfg.mode == TrainMode::E2e;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = TrainTrace::default();
    let mut best: Option<(usize, f64, Model<T>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut ols, mut orth, mut l1) = (0.0, 0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let inputs = train.inputs.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let batch = Batch {
                inputs: inputs.view(),
                labels: &labels,
            };
            let (value, grads) = evaluate(batch, &model, &cfg.reg, cfg.mode)?;
            if !value.total.is_finite() {
                return Err(GduError::Divergence { epoch });
            }
            grads.check_finite()?;
            let w = chunk.len() as f64;
            loss += w * value.loss.to_f64_lossy();
            ols += w * value.omega.ols.to_f64_lossy();
            orth += w * value.omega.orth.to_f64_lossy();
            l1 += w * value.omega.l1.to_f64_lossy();
            let blocks = grads.blocks();
            let mut slots = model.param_slots(include_fe);
            opt.step(&mut slots, &blocks)?;
        }
        let n = train.len() as f64;
        let val_acc = model.accuracy(validation)?;
        let srip = match (&model.head, cfg.track_srip) {
            (Head::Gdu(layer), true) => {
                Some(omega_orth(layer.gram_bases().view(), OrthVariant::Srip)?.to_f64_lossy())
            }
            _ => None,
        };
        trace.epochs.push(EpochRecord {
            epoch,
            loss: loss / n,
            val_acc,
            srip,
            omega_ols: ols / n,
            omega_orth: orth / n,
            omega_l1: l1 / n,
        });
        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_acc, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        trace,
        best_epoch,
        best_val_acc,
    })
}

/// ERM pretraining of a feature extractor with a single learning machine head,
/// trained end to end without domain regularization. The head is discarded.
pub fn pretrain_feature_extractor<T: Scalar>(
    train_data: &Dataset<T>,
    validation: &Dataset<T>,
    fe: FeatureExtractor<T>,
    num_classes: usize,
    activation: Activation,
    cfg: &TrainConfig<T>,
) -> Result<FeatureExtractor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_f00d);
    let head = LearningMachine::init(fe.output_dim(), num_classes, activation, &mut rng);
    let model = Model::new(fe, Head::Single(head))?;
    let erm_cfg = TrainConfig {
        mode: TrainMode::E2e,
        reg: RegConfig::none(),
        track_srip: false,
        ..*cfg
    };
    Ok(train(train_data, validation, &erm_cfg, model)?.model.fe)
}
