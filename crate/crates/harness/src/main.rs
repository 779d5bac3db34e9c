use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdu_core::datagen::{make_benchmark, write_dataset_csv, DomainRole};
use gdu_core::heuristics::select_m;
use gdu_core::training::Model;
use gdu_core::Dataset;
use gdu_harness::experiment::{domain_accuracies, erm_single, load_data, run_method};
use gdu_harness::pareto::{elementary_sets, hypothesis_grid, pareto_check, Loss, GRID_LIMIT, GRID_STEP};
use gdu_harness::sweep::{sweep, sweep_csv, SweepParam};
use gdu_harness::{export_embeddings, run_experiment, ExperimentConfig, HarnessError, Method, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gdu", version, about = "Gated domain unit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Flat `key = value` experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed (benchmark seed for `gen`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Gating mode: cs, mmd or projection.
    #[arg(long)]
    mode: Option<String>,
    /// ft or e2e.
    #[arg(long = "train-mode")]
    train_mode: Option<String>,
    /// Number of domain bases.
    #[arg(long)]
    m: Option<usize>,
    /// Vectors per basis.
    #[arg(long)]
    n: Option<usize>,
    /// `median` or a positive bandwidth.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the synthetic benchmark into train/validation/target CSV files.
    Gen(Common),
    /// Train one GDU model and write its checkpoint and training trace.
    Train(Common),
    /// Evaluate a checkpoint on the validation and target splits.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run every configured method for every seed.
    Run(Common),
    /// Repeat `run` over values of `m` or a regularization weight.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// m, lambda_ols, lambda_orth or lambda_l1.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Choose the number of bases by k-means and Davies-Bouldin scores.
    SelectM {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        k_min: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Cluster raw inputs instead of pretrained features.
        #[arg(long)]
        raw: bool,
    },
    /// Check that the target-weighted risk minimizer is Pareto optimal over elementary risks.
    ParetoCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "logistic")]
        loss: String,
        /// Samples per elementary component.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Random hypotheses added to the grid.
        #[arg(long, default_value_t = 100)]
        random: usize,
    },
    /// Write features, labels, domains and gating weights of a checkpoint.
    ExportEmbeddings {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// train, validation or target.
        #[arg(long, default_value = "target")]
        split: String,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("mode", c.mode.clone()),
        ("train_mode", c.train_mode.clone()),
        ("m", c.m.map(|v| v.to_string())),
        ("n", c.n.map(|v| v.to_string())),
        ("sigma", c.sigma.clone()),
        ("kappa", c.kappa.map(|v| v.to_string())),
        ("seeds", c.seed.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

fn csv(data: &Dataset<f64>) -> Result<String> {
    let mut buf = Vec::new();
    write_dataset_csv(data, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn load_model(path: &Path) -> Result<Model<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(Model::from_checkpoint(&text)?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(c) => {
            let mut cfg = load_config(&Common { seed: None, ..c.clone() })?;
            if let Some(s) = c.seed {
                cfg.benchmark.seed = s;
            }
            let splits = make_benchmark(&cfg.benchmark)?.sample()?;
            for (name, d) in [
                ("train.csv", &splits.train),
                ("validation.csv", &splits.validation),
                ("target.csv", &splits.target),
            ] {
                write(&c.out, name, &csv(d)?)?;
            }
            write(&c.out, "benchmark.kv", &cfg.benchmark.to_kv())?;
            println!(
                "wrote {} train, {} validation, {} target rows to {}",
                splits.train.len(),
                splits.validation.len(),
                splits.target.len(),
                c.out.display()
            );
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let data = load_data(&cfg)?;
            let method = Method::gdu(cfg.mode, cfg.train_mode);
            let seed = cfg.seeds[0];
            let run = run_method(&data, &cfg, method, seed, None)?;
            write(&c.out, "model.ckpt", &run.outcome.model.to_checkpoint())?;
            write(&c.out, "trace.csv", &run.outcome.trace.to_csv())?;
            write(&c.out, "metrics.json", &serde_json::to_string_pretty(&run.record)?)?;
            println!(
                "{method} seed {seed}: target {:.4}, validation {:.4}, best epoch {}",
                run.record.target_acc, run.record.val_acc, run.record.best_epoch
            );
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let model = load_model(&checkpoint)?;
            let report = json!({
                "target_acc": model.accuracy(&data.target)?,
                "val_acc": model.accuracy(&data.validation)?,
                "domain_accs": domain_accuracies(&model, &data)?,
            });
            write(&common.out, "eval.json", &serde_json::to_string_pretty(&report)?)?;
            println!("{report}");
        }
        Command::Run(c) => {
            let cfg = load_config(&c)?;
            let result = run_experiment(&cfg)?;
            result.write(&c.out)?;
            for s in result.summary() {
                println!(
                    "{:<20} target {:.4} ({:.4})  worst {:.4}  runs {}",
                    s.method, s.target_acc.mean, s.target_acc.std, s.worst_domain_acc.mean, s.runs
                );
            }
        }
        Command::Sweep { common, param, values } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let param: SweepParam = param.parse()?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
            let points = sweep(&data, &cfg, param, &values)?;
            let text = sweep_csv(param, &points);
            write(&common.out, "sweep.csv", &text)?;
            print!("{text}");
        }
        Command::SelectM { common, k_min, k_max, runs, raw } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let seed = cfg.seeds[0];
            let feats = if raw {
                data.train.inputs.clone()
            } else {
                let base = erm_single(&data, &cfg, seed).map_err(|source| HarnessError::Run {
                    method: Method::ErmSingle.to_string(),
                    seed,
                    source,
                })?;
                base.model.features(data.train.inputs.view())?
            };
            let result = select_m(feats.view(), k_min, k_max, runs, seed)?;
            write(&common.out, "select_m.csv", &result.to_csv())?;
            print!("{}", result.to_csv());
            println!("chosen M = {}", result.chosen);
        }
        Command::ParetoCheck { common, loss, samples, random } => {
            let cfg = load_config(&common)?;
            let loss: Loss = loss.parse()?;
            let seed = cfg.seeds[0];
            let bench = make_benchmark(&cfg.benchmark)?;
            let alpha = bench
                .role(DomainRole::Target)
                .next()
                .map(|d| d.alpha.clone())
                .ok_or_else(|| HarnessError::Config("benchmark has no target domain".into()))?;
            let sets = elementary_sets(&bench, samples, seed)?;
            let hyps = hypothesis_grid(cfg.benchmark.dim, GRID_LIMIT, GRID_STEP, random, seed);
            let report = pareto_check(&hyps, &sets, &alpha, loss)?;
            let out = json!({
                "loss": loss.to_string(),
                "hypotheses": hyps.len(),
                "alpha": alpha,
                "candidate": report.candidate,
                "candidate_weights": hyps[report.candidate].weights,
                "candidate_bias": hyps[report.candidate].bias,
                "candidate_risks": report.risks.row(report.candidate).to_vec(),
                "is_pareto": report.is_pareto,
                "dominating_witness": report.dominating_witness,
            });
            write(&common.out, "pareto.json", &serde_json::to_string_pretty(&out)?)?;
            println!("{out}");
        }
        Command::ExportEmbeddings { common, checkpoint, split } => {
            let cfg = load_config(&common)?;
            let data = load_data(&cfg)?;
            let model = load_model(&checkpoint)?;
            let d = match split.as_str() {
                "train" => &data.train,
                "validation" => &data.validation,
                "target" => &data.target,
                other => return Err(HarnessError::Config(format!("unknown split `{other}`"))),
            };
            let path = write(&common.out, "embeddings.csv", &export_embeddings(&model, d)?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
