//! Experiment configuration as flat `key = value` text.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gdu_core::datagen::BenchmarkParams;
use gdu_core::kv::parse_kv;
use gdu_core::training::{Nonlinearity, OptimizerConfig, OptimizerKind, TrainConfig, TrainMode};
use gdu_core::{Activation, GatingMode, GduError, OrthVariant, RegConfig};

use crate::error::{HarnessError, Result};

/// Kernel bandwidth: the median heuristic on extracted features or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Median,
    Fixed(f64),
}

impl fmt::Display for SigmaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaChoice::Median => f.write_str("median"),
            SigmaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for SigmaChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("median") {
            return Ok(SigmaChoice::Median);
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| HarnessError::Config(format!("sigma must be `median` or a number, got `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(HarnessError::Config(format!("sigma must be positive, got {v}")));
        }
        Ok(SigmaChoice::Fixed(v))
    }
}

/// Where the domain basis vectors of a fresh GDU layer start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisInit {
    /// Isotropic Gaussian draws around the origin.
    Random,
    /// Distinct training feature vectors drawn uniformly.
    Sample,
    /// Training feature vectors drawn from the `M` k-means clusters, one cluster per basis.
    #[default]
    Kmeans,
}

impl fmt::Display for BasisInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisInit::Random => "random",
            BasisInit::Sample => "sample",
            BasisInit::Kmeans => "kmeans",
        })
    }
}

impl FromStr for BasisInit {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(BasisInit::Random),
            "sample" => Ok(BasisInit::Sample),
            "kmeans" => Ok(BasisInit::Kmeans),
            other => Err(HarnessError::Config(format!("unknown basis_init `{other}`"))),
        }
    }
}

/// A trainable method compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ErmSingle,
    ErmEnsemble,
    Gdu(GduVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GduVariant {
    pub mode: ModeKey,
    pub e2e: bool,
}

/// Orderable wrapper so methods sort deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeKey {
    Cs,
    Mmd,
    Projection,
}

impl From<ModeKey> for GatingMode {
    fn from(m: ModeKey) -> Self {
        match m {
            ModeKey::Cs => GatingMode::Cs,
            ModeKey::Mmd => GatingMode::Mmd,
            ModeKey::Projection => GatingMode::Projection,
        }
    }
}

impl From<GatingMode> for ModeKey {
    fn from(m: GatingMode) -> Self {
        match m {
            GatingMode::Cs => ModeKey::Cs,
            GatingMode::Mmd => ModeKey::Mmd,
            GatingMode::Projection => ModeKey::Projection,
        }
    }
}

impl Method {
    pub fn gdu(mode: GatingMode, train_mode: TrainMode) -> Self {
        Method::Gdu(GduVariant {
            mode: mode.into(),
            e2e: train_mode == TrainMode::E2e,
        })
    }

    pub fn is_gdu(self) -> bool {
        matches!(self, Method::Gdu(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::ErmSingle => f.write_str("erm_single"),
            Method::ErmEnsemble => f.write_str("erm_ensemble"),
            Method::Gdu(v) => write!(
                f,
                "gdu_{}_{}",
                GatingMode::from(v.mode),
                if v.e2e { "e2e" } else { "ft" }
            ),
        }
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "erm_single" => return Ok(Method::ErmSingle),
            "erm_ensemble" => return Ok(Method::ErmEnsemble),
            _ => {}
        }
        let parts: Vec<&str> = s.split('_').collect();
        if parts.len() == 3 && parts[0] == "gdu" {
            let mode: GatingMode = parts[1].parse()?;
            let train_mode: TrainMode = parts[2].parse()?;
            return Ok(Method::gdu(mode, train_mode));
        }
        Err(HarnessError::Config(format!("unknown method `{s}`")))
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| HarnessError::Config(format!("bad entry `{s}` in `{key}`")))
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Directory with `train.csv`, `validation.csv` and `target.csv`; when absent
    /// the benchmark is generated from `benchmark`.
    pub data: Option<PathBuf>,
    pub benchmark: BenchmarkParams,

    /// Number of domain bases `M`.
    pub m: usize,
    /// Vectors per basis `N`.
    pub n: usize,
    pub sigma: SigmaChoice,
    /// Bandwidth used by end-to-end runs when `sigma = median`.
    pub e2e_sigma: f64,
    pub kappa: f64,
    pub basis_init: BasisInit,
    /// FT heads start as copies of the pretrained ERM head.
    pub warm_start: bool,
    pub mode: GatingMode,
    pub train_mode: TrainMode,
    pub activation: Activation,
    /// Hidden layer widths of the feature extractor.
    pub fe_hidden: Vec<usize>,
    /// Feature dimension `e`.
    pub fe_dim: usize,
    pub fe_nonlinearity: Nonlinearity,

    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub track_srip: bool,

    pub lambda_ols: f64,
    pub lambda_orth: f64,
    pub lambda_l1: f64,
    pub orth_variant: OrthVariant,

    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::<f64>::default();
        Self {
            data: None,
            benchmark: BenchmarkParams::default(),
            m: 5,
            n: 10,
            sigma: SigmaChoice::Median,
            e2e_sigma: 4.5,
            kappa: 2.0,
            basis_init: BasisInit::default(),
            warm_start: true,
            mode: GatingMode::Mmd,
            train_mode: TrainMode::Ft,
            activation: Activation::Identity,
            fe_hidden: Vec::new(),
            fe_dim: 8,
            fe_nonlinearity: Nonlinearity::Identity,
            learning_rate: opt.learning_rate,
            optimizer: opt.kind,
            adam_beta1: opt.beta1,
            adam_beta2: opt.beta2,
            adam_eps: opt.eps,
            batch_size: 32,
            max_epochs: 100,
            patience: 15,
            track_srip: false,
            lambda_ols: 1e-3,
            lambda_orth: 1e-3,
            lambda_l1: 1e-3,
            orth_variant: OrthVariant::Srip,
            seeds: (0..10).collect(),
            methods: vec![
                Method::ErmSingle,
                Method::ErmEnsemble,
                Method::gdu(GatingMode::Cs, TrainMode::Ft),
                Method::gdu(GatingMode::Mmd, TrainMode::Ft),
                Method::gdu(GatingMode::Projection, TrainMode::Ft),
            ],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// Sets one key. Benchmark keys are forwarded to [`BenchmarkParams`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_relative(key, value, Path::new(""))
    }

    /// Like [`set`](Self::set), resolving path values against `base`. The
    /// `benchmark` key loads a file of benchmark parameters.
    pub fn set_relative(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "data" => self.data = Some(base.join(value.trim())),
            "benchmark" => {
                let path = base.join(value.trim());
                let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
                self.benchmark = BenchmarkParams::from_kv(&text)?;
            }
            "m" => self.m = parse_value(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "sigma" => self.sigma = value.parse()?,
            "e2e_sigma" => self.e2e_sigma = parse_value(key, value)?,
            "kappa" => self.kappa = parse_value(key, value)?,
            "basis_init" => self.basis_init = value.parse()?,
            "warm_start" => self.warm_start = parse_bool(key, value)?,
            "mode" => self.mode = value.parse()?,
            "train_mode" => self.train_mode = value.parse()?,
            "activation" => self.activation = value.parse()?,
            "fe_hidden" => self.fe_hidden = list(key, value)?,
            "fe_dim" => self.fe_dim = parse_value(key, value)?,
            "fe_nonlinearity" => self.fe_nonlinearity = value.parse()?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam_eps = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "track_srip" => self.track_srip = parse_bool(key, value)?,
            "lambda_ols" => self.lambda_ols = parse_value(key, value)?,
            "lambda_orth" => self.lambda_orth = parse_value(key, value)?,
            "lambda_l1" => self.lambda_l1 = parse_value(key, value)?,
            "orth_variant" => self.orth_variant = value.parse()?,
            "seeds" => self.seeds = list(key, value)?,
            "methods" => self.methods = list(key, value)?,
            _ => {
                if !self.benchmark.set(key, value)? {
                    return Err(HarnessError::Config(format!("unknown key `{key}`")));
                }
            }
        }
        Ok(())
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        Self::from_kv_relative(text, Path::new(""))
    }

    fn from_kv_relative(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for entry in parse_kv(text)? {
            cfg.set_relative(&entry.key, &entry.value, base).map_err(|e| match e {
                HarnessError::Config(msg) => HarnessError::Core(GduError::parse(entry.line, msg)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_kv_relative(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(d) = &self.data {
            put("data", d.display().to_string());
        }
        put("m", self.m.to_string());
        put("n", self.n.to_string());
        put("sigma", self.sigma.to_string());
        put("e2e_sigma", self.e2e_sigma.to_string());
        put("kappa", self.kappa.to_string());
        put("basis_init", self.basis_init.to_string());
        put("warm_start", self.warm_start.to_string());
        put("mode", self.mode.to_string());
        put("train_mode", self.train_mode.to_string());
        put("activation", self.activation.to_string());
        put("fe_hidden", join(&self.fe_hidden));
        put("fe_dim", self.fe_dim.to_string());
        put("fe_nonlinearity", self.fe_nonlinearity.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("optimizer", self.optimizer.to_string());
        put("adam_beta1", self.adam_beta1.to_string());
        put("adam_beta2", self.adam_beta2.to_string());
        put("adam_eps", self.adam_eps.to_string());
        put("batch_size", self.batch_size.to_string());
        put("max_epochs", self.max_epochs.to_string());
        put("patience", self.patience.to_string());
        put("track_srip", self.track_srip.to_string());
        put("lambda_ols", self.lambda_ols.to_string());
        put("lambda_orth", self.lambda_orth.to_string());
        put("lambda_l1", self.lambda_l1.to_string());
        put("orth_variant", self.orth_variant.to_string());
        put("seeds", join(&self.seeds));
        put("methods", join(&self.methods));
        out.push_str(&self.benchmark.to_kv());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.fe_dim == 0 {
            return Err(HarnessError::Config("m, n and fe_dim must be positive".into()));
        }
        if self.fe_hidden.contains(&0) {
            return Err(HarnessError::Config("hidden layer widths must be positive".into()));
        }
        if !(self.kappa > 0.0) || !(self.e2e_sigma > 0.0) {
            return Err(HarnessError::Config("kappa and e2e_sigma must be positive".into()));
        }
        if self.seeds.is_empty() || self.methods.is_empty() {
            return Err(HarnessError::Config("need at least one seed and one method".into()));
        }
        self.benchmark.validate()?;
        self.train_config(TrainMode::Ft, 0).validate()?;
        Ok(())
    }

    pub fn reg(&self) -> RegConfig<f64> {
        RegConfig {
            lambda_ols: self.lambda_ols,
            lambda_orth: self.lambda_orth,
            lambda_l1: self.lambda_l1,
            orth_variant: self.orth_variant,
        }
    }

    pub fn train_config(&self, mode: TrainMode, seed: u64) -> TrainConfig<f64> {
        TrainConfig {
            mode,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed,
            optimizer: OptimizerConfig {
                kind: self.optimizer,
                learning_rate: self.learning_rate,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
            reg: self.reg(),
            track_srip: self.track_srip,
        }
    }

    /// Feature extractor layer sizes for input dimension `d`.
    pub fn fe_sizes(&self, d: usize) -> Vec<usize> {
        let mut sizes = vec![d];
        sizes.extend(&self.fe_hidden);
        sizes.push(self.fe_dim);
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("m", "3").unwrap();
        cfg.set("sigma", "1.5").unwrap();
        cfg.set("methods", "erm_single, gdu_cs_e2e").unwrap();
        cfg.set("separation", "8").unwrap();
        let back = ExperimentConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = ExperimentConfig::from_kv("m = 2\nwidth = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ExperimentConfig::from_kv("sigma = wide").is_err());
        assert!(ExperimentConfig::from_kv("patience = 500").is_err());
    }

    #[test]
    fn method_names() {
        for name in ["erm_single", "erm_ensemble", "gdu_mmd_ft", "gdu_projection_e2e"] {
            assert_eq!(name.parse::<Method>().unwrap().to_string(), name);
        }
        assert!("gdu_rbf_ft".parse::<Method>().is_err());
    }
}
