//! Training runs for every method and seed, metrics and result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use gdu_core::datagen::{make_benchmark, read_dataset_csv};
use gdu_core::training::{
    train, DatasetSplits, FeatureExtractor, Head, Model, TrainMode, TrainOutcome,
};
use gdu_core::heuristics::kmeans;
use gdu_core::{median_heuristic, Dataset, DomainBasis, GduLayer, KernelConfig, LayerShape, LearningMachine};
use ndarray::{ArrayView2, Axis};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BasisInit, ExperimentConfig, Method, SigmaChoice};
use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

const FE_STREAM: u64 = 0x0fe0_0001;
const HEAD_STREAM: u64 = 0x4ead_0002;
const SHUFFLE_STREAM: u64 = 0x5bff_0003;
const BASIS_STREAM: u64 = 0xba5e_0004;

/// Independent sub-seed for one purpose of one run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Loads `train.csv`, `validation.csv` and `target.csv` from `cfg.data`, or
/// samples the configured synthetic benchmark.
pub fn load_data(cfg: &ExperimentConfig) -> Result<DatasetSplits<f64>> {
    let Some(dir) = &cfg.data else {
        return Ok(make_benchmark(&cfg.benchmark)?.sample()?);
    };
    let read = |name: &str| -> Result<Dataset<f64>> {
        let path = dir.join(name);
        let f = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
        Ok(read_dataset_csv(BufReader::new(f))?)
    };
    Ok(DatasetSplits {
        train: read("train.csv")?,
        validation: read("validation.csv")?,
        target: read("target.csv")?,
    })
}

pub fn num_classes(data: &DatasetSplits<f64>) -> usize {
    [&data.train, &data.validation, &data.target]
        .iter()
        .map(|d| d.num_classes())
        .max()
        .unwrap_or(0)
        .max(2)
}

/// Freshly initialized feature extractor for a seed; every method of a seed starts from it.
pub fn init_feature_extractor(
    cfg: &ExperimentConfig,
    input_dim: usize,
    seed: u64,
) -> Result<FeatureExtractor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FE_STREAM));
    Ok(FeatureExtractor::init(
        &cfg.fe_sizes(input_dim),
        cfg.fe_nonlinearity,
        &mut rng,
    )?)
}

fn machines(cfg: &ExperimentConfig, e: usize, c: usize, count: usize, seed: u64) -> Vec<LearningMachine<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, HEAD_STREAM));
    (0..count)
        .map(|_| LearningMachine::init(e, c, cfg.activation, &mut rng))
        .collect()
}

fn fit(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    mode: TrainMode,
    seed: u64,
    model: Model<f64>,
) -> gdu_core::Result<TrainOutcome<f64>> {
    let tc = cfg.train_config(mode, derive_seed(seed, SHUFFLE_STREAM));
    train(&data.train, &data.validation, &tc, model)
}

/// Feature extractor plus one learning machine, trained end to end by ERM
/// without domain regularization.
pub fn erm_single(data: &DatasetSplits<f64>, cfg: &ExperimentConfig, seed: u64) -> gdu_core::Result<TrainOutcome<f64>> {
    let fe = init_feature_extractor(cfg, data.train.dim(), seed).map_err(core_error)?;
    let head = machines(cfg, cfg.fe_dim, num_classes(data), 1, seed).remove(0);
    let mut plain = cfg.clone();
    plain.lambda_ols = 0.0;
    plain.lambda_orth = 0.0;
    plain.lambda_l1 = 0.0;
    fit(data, &plain, TrainMode::E2e, seed, Model::new(fe, Head::Single(head))?)
}

/// Extractor and `M` starting machines. With a pretrained model the extractor is
/// reused (FT) and, under `warm_start`, every machine copies its head.
fn starting_point(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
    pretrained: Option<&Model<f64>>,
) -> gdu_core::Result<(FeatureExtractor<f64>, Vec<LearningMachine<f64>>, TrainMode)> {
    let fresh = machines(cfg, cfg.fe_dim, num_classes(data), cfg.m, seed);
    Ok(match pretrained {
        Some(p) if cfg.warm_start => (p.fe.clone(), vec![p.head.machines()[0].clone(); cfg.m], TrainMode::Ft),
        Some(p) => (p.fe.clone(), fresh, TrainMode::Ft),
        None => (
            init_feature_extractor(cfg, data.train.dim(), seed).map_err(core_error)?,
            fresh,
            TrainMode::E2e,
        ),
    })
}

/// `M` uniformly averaged learning machines. With `pretrained` the extractor is
/// frozen, otherwise a fresh extractor is trained jointly.
pub fn erm_ensemble(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
    pretrained: Option<&Model<f64>>,
) -> gdu_core::Result<TrainOutcome<f64>> {
    let (fe, heads, mode) = starting_point(data, cfg, seed, pretrained)?;
    fit(data, cfg, mode, seed, Model::new(fe, Head::Ensemble(heads))?)
}

/// Kernel bandwidth for a run: median heuristic on the extracted training
/// features for frozen extractors, the configured value otherwise.
pub fn choose_sigma(
    cfg: &ExperimentConfig,
    data: &DatasetSplits<f64>,
    pretrained: Option<&Model<f64>>,
) -> gdu_core::Result<f64> {
    match (cfg.sigma, pretrained) {
        (SigmaChoice::Fixed(s), _) => Ok(s),
        (SigmaChoice::Median, Some(p)) => {
            let feats = p.fe.forward_batch(data.train.inputs.view())?;
            median_heuristic(feats.view())
        }
        (SigmaChoice::Median, None) => Ok(cfg.e2e_sigma),
    }
}

/// `m` bases of `n` training feature rows each. With [`BasisInit::Kmeans`] basis
/// `j` draws from cluster `j` (with replacement when the cluster is small).
pub fn bases_from_features(
    feats: ArrayView2<'_, f64>,
    m: usize,
    n: usize,
    init: BasisInit,
    seed: u64,
) -> gdu_core::Result<Vec<DomainBasis<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools: Vec<Vec<usize>> = match init {
        BasisInit::Kmeans => {
            let clusters = kmeans(feats, m, seed)?;
            let mut pools = vec![Vec::new(); m];
            for (i, &a) in clusters.assignments.iter().enumerate() {
                pools[a].push(i);
            }
            pools
        }
        _ => vec![(0..feats.nrows()).collect(); m],
    };
    pools
        .iter()
        .map(|pool| {
            let rows: Vec<usize> = if pool.len() >= n {
                pool.choose_multiple(&mut rng, n).copied().collect()
            } else {
                (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
            };
            DomainBasis::new(feats.select(Axis(0), &rows))
        })
        .collect()
}

/// GDU layer on a frozen pretrained extractor (FT) or trained jointly with a fresh one (E2E).
pub fn gdu(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    seed: u64,
    mode: gdu_core::GatingMode,
    pretrained: Option<&Model<f64>>,
) -> gdu_core::Result<TrainOutcome<f64>> {
    let sigma = choose_sigma(cfg, data, pretrained)?;
    let layer = GduLayer::init_layer(
        LayerShape {
            m: cfg.m,
            n: cfg.n,
            e: cfg.fe_dim,
            c: num_classes(data),
        },
        derive_seed(seed, HEAD_STREAM),
        mode,
        KernelConfig::new(sigma)?,
        cfg.kappa,
        cfg.activation,
    )?;
    let (fe, heads, train_mode) = starting_point(data, cfg, seed, pretrained)?;
    let bases = match cfg.basis_init {
        BasisInit::Random => layer.bases().to_vec(),
        init => {
            let feats = fe.forward_batch(data.train.inputs.view())?;
            bases_from_features(feats.view(), cfg.m, cfg.n, init, derive_seed(seed, BASIS_STREAM))?
        }
    };
    let layer = GduLayer::new(bases, heads, *layer.kernel(), mode, cfg.kappa)?;
    fit(data, cfg, train_mode, seed, Model::new(fe, Head::Gdu(layer))?)
}

fn core_error(e: HarnessError) -> gdu_core::GduError {
    match e {
        HarnessError::Core(e) => e,
        other => gdu_core::GduError::InvalidConfig(other.to_string()),
    }
}

/// Metrics of one trained method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub target_acc: f64,
    pub val_acc: f64,
    pub worst_domain_acc: f64,
    pub mean_domain_acc: f64,
    /// Accuracy per held-out domain id (validation domains and target domains).
    pub domain_accs: BTreeMap<usize, f64>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub record: RunRecord,
    pub outcome: TrainOutcome<f64>,
}

/// Accuracy on every domain of the validation and target splits.
pub fn domain_accuracies(model: &Model<f64>, data: &DatasetSplits<f64>) -> gdu_core::Result<BTreeMap<usize, f64>> {
    let mut out = BTreeMap::new();
    for split in [&data.validation, &data.target] {
        for id in split.domain_ids() {
            out.insert(id, model.accuracy(&split.domain(id))?);
        }
    }
    Ok(out)
}

fn record(
    method: Method,
    seed: u64,
    data: &DatasetSplits<f64>,
    outcome: &TrainOutcome<f64>,
    seconds: f64,
) -> gdu_core::Result<RunRecord> {
    let model = &outcome.model;
    let domain_accs = domain_accuracies(model, data)?;
    let worst = domain_accs.values().copied().fold(f64::INFINITY, f64::min);
    let mean = domain_accs.values().sum::<f64>() / domain_accs.len() as f64;
    Ok(RunRecord {
        method: method.to_string(),
        seed,
        target_acc: model.accuracy(&data.target)?,
        val_acc: model.accuracy(&data.validation)?,
        worst_domain_acc: worst,
        mean_domain_acc: mean,
        domain_accs,
        best_epoch: outcome.best_epoch,
        epochs: outcome.trace.len(),
        final_loss: outcome.trace.last().map_or(f64::NAN, |r| r.loss),
        seconds,
    })
}

/// Trains one method for one seed. `pretrained` is the ERM single run that FT
/// methods build on; it is computed when absent and needed.
pub fn run_method(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    pretrained: Option<&TrainOutcome<f64>>,
) -> Result<MethodRun> {
    let ctx = |source| HarnessError::Run {
        method: method.to_string(),
        seed,
        source,
    };
    let ft = match method {
        Method::Gdu(v) => !v.e2e,
        _ => cfg.train_mode == TrainMode::Ft,
    };
    let start = Instant::now();
    let owned;
    let base = if ft || method == Method::ErmSingle {
        match pretrained {
            Some(p) => Some(p),
            None => {
                owned = erm_single(data, cfg, seed).map_err(ctx)?;
                Some(&owned)
            }
        }
    } else {
        None
    };
    let frozen = base.filter(|_| ft).map(|p| &p.model);
    let outcome = match method {
        Method::ErmSingle => base.expect("computed above").clone(),
        Method::ErmEnsemble => erm_ensemble(data, cfg, seed, frozen).map_err(ctx)?,
        Method::Gdu(v) => gdu(data, cfg, seed, v.mode.into(), frozen).map_err(ctx)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let record = record(method, seed, data, &outcome, seconds).map_err(ctx)?;
    Ok(MethodRun { record, outcome })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation; the deviation of a single value is 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub target_acc: Stat,
    pub val_acc: Stat,
    pub worst_domain_acc: Stat,
    pub seconds: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub config: String,
    pub records: Vec<RunRecord>,
}

impl ExperimentResult {
    /// Rows of one method in seed order.
    pub fn rows(&self, method: Method) -> Vec<&RunRecord> {
        let name = method.to_string();
        self.records.iter().filter(|r| r.method == name).collect()
    }

    pub fn summary(&self) -> Vec<MethodSummary> {
        let mut groups: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(&r.method).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(method, rows)| {
                let col = |f: fn(&RunRecord) -> f64| Stat::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
                MethodSummary {
                    method: method.to_string(),
                    runs: rows.len(),
                    target_acc: col(|r| r.target_acc),
                    val_acc: col(|r| r.val_acc),
                    worst_domain_acc: col(|r| r.worst_domain_acc),
                    seconds: col(|r| r.seconds),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let ids: Vec<usize> = self
            .records
            .iter()
            .flat_map(|r| r.domain_accs.keys().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut out = String::from(
            "method,seed,target_acc,val_acc,worst_domain_acc,mean_domain_acc,best_epoch,epochs,final_loss,seconds",
        );
        for id in &ids {
            let _ = write!(out, ",acc_domain_{id}");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.method,
                r.seed,
                r.target_acc,
                r.val_acc,
                r.worst_domain_acc,
                r.mean_domain_acc,
                r.best_epoch,
                r.epochs,
                r.final_loss,
                r.seconds
            );
            for id in &ids {
                let v = r.domain_accs.get(id).map(|v| v.to_string()).unwrap_or_default();
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            schema_version: u32,
            config: &'a str,
            methods: Vec<MethodSummary>,
        }
        Ok(serde_json::to_string_pretty(&Summary {
            schema_version: self.schema_version,
            config: &self.config,
            methods: self.summary(),
        })?)
    }

    /// Writes `results.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        for (name, text) in [("results.csv", self.to_csv()), ("summary.json", self.summary_json()?)] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Runs every configured method for every seed in parallel. The ERM single run
/// of each seed is shared by the methods that fine-tune on its extractor.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    run_on(&data, cfg)
}

pub fn run_on(data: &DatasetSplits<f64>, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let needs_base = |m: &Method| match m {
        Method::ErmSingle => true,
        Method::Gdu(v) => !v.e2e,
        Method::ErmEnsemble => cfg.train_mode == TrainMode::Ft,
    };
    let bases: Vec<Option<TrainOutcome<f64>>> = if cfg.methods.iter().any(needs_base) {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                erm_single(data, cfg, seed)
                    .map(Some)
                    .map_err(|source| HarnessError::Run {
                        method: Method::ErmSingle.to_string(),
                        seed,
                        source,
                    })
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; cfg.seeds.len()]
    };
    let jobs: Vec<(Method, usize)> = cfg
        .methods
        .iter()
        .flat_map(|&m| (0..cfg.seeds.len()).map(move |i| (m, i)))
        .collect();
    let mut records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(method, i)| {
            run_method(data, cfg, method, cfg.seeds[i], bases[i].as_ref()).map(|r| r.record)
        })
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| (&a.method, a.seed).cmp(&(&b.method, b.seed)));
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        config: cfg.to_kv(),
        records,
    })
}
