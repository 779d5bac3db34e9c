//! One-parameter sweeps over `M` or a regularization weight.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use gdu_core::training::DatasetSplits;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{run_on, ExperimentResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    M,
    LambdaOls,
    LambdaOrth,
    LambdaL1,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::M => "m",
            SweepParam::LambdaOls => "lambda_ols",
            SweepParam::LambdaOrth => "lambda_orth",
            SweepParam::LambdaL1 => "lambda_l1",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "m" | "M" => Ok(SweepParam::M),
            "lambda_ols" => Ok(SweepParam::LambdaOls),
            "lambda_orth" => Ok(SweepParam::LambdaOrth),
            "lambda_l1" => Ok(SweepParam::LambdaL1),
            other => Err(HarnessError::Config(format!("cannot sweep `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub result: ExperimentResult,
}

/// Runs the experiment once per value on the same data.
pub fn sweep(
    data: &DatasetSplits<f64>,
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[String],
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(param.key(), v)?;
            c.validate()?;
            Ok(SweepPoint {
                value: v.clone(),
                result: run_on(data, &c)?,
            })
        })
        .collect()
}

/// `param,value,method,runs,target_mean,target_std,worst_mean`
pub fn sweep_csv(param: SweepParam, points: &[SweepPoint]) -> String {
    let mut out = String::from("param,value,method,runs,target_mean,target_std,worst_mean\n");
    for p in points {
        for s in p.result.summary() {
            let _ = writeln!(
                out,
                "{param},{},{},{},{},{},{}",
                p.value, s.method, s.runs, s.target_acc.mean, s.target_acc.std, s.worst_domain_acc.mean
            );
        }
    }
    out
}
