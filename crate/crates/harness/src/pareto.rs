//! Brute-force Pareto check over a finite set of linear binary classifiers.
//!
//! Each hypothesis gets one empirical risk per elementary sample set. The
//! minimizer of the `alpha`-weighted risk sum is then tested for dominance:
//! `g` dominates `f` when `R_j(g) <= R_j(f)` for every `j` with strict
//! inequality for at least one `j`.

use std::fmt;
use std::str::FromStr;

use gdu_core::datagen::{sample_domain, DomainRole, DomainSpec, SyntheticBenchmark};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};

/// Default grid bounds and step for hypothesis weights.
pub const GRID_LIMIT: f64 = 2.0;
pub const GRID_STEP: f64 = 0.5;

/// `x -> [w . x + b > 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHypothesis {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHypothesis {
    pub fn score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Logistic,
    ZeroOne,
}

impl Loss {
    /// Loss of `score` for a label in `{0, 1}`.
    pub fn eval(self, score: f64, label: usize) -> f64 {
        let signed = if label == 1 { score } else { -score };
        match self {
            // ln(1 + e^-z), stable for large |z|
            Loss::Logistic => (-signed).max(0.0) + (-signed.abs()).exp().ln_1p(),
            Loss::ZeroOne => f64::from(u8::from(signed <= 0.0)),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Logistic => "logistic",
            Loss::ZeroOne => "zero_one",
        })
    }
}

impl FromStr for Loss {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" => Ok(Loss::Logistic),
            "zero_one" | "01" | "0-1" => Ok(Loss::ZeroOne),
            other => Err(HarnessError::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// Binary-labelled samples of one elementary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSet {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

/// `n` binary-labelled samples from every elementary component of a benchmark.
pub fn elementary_sets(bench: &SyntheticBenchmark, n: usize, seed: u64) -> Result<Vec<LabelledSet>> {
    if bench.elementary.num_classes() != 2 {
        return Err(HarnessError::Config(format!(
            "Pareto check needs 2 classes, benchmark has {}",
            bench.elementary.num_classes()
        )));
    }
    let k = bench.elementary.k();
    (0..k)
        .map(|j| {
            let mut alpha = vec![0.0; k];
            alpha[j] = 1.0;
            let spec = DomainSpec {
                id: j,
                alpha,
                n_samples: n,
                role: DomainRole::Source,
            };
            let d = sample_domain(&spec, &bench.elementary, seed.wrapping_add(j as u64))?;
            Ok(LabelledSet {
                inputs: d.inputs,
                labels: d.labels,
            })
        })
        .collect()
}

/// Weight vectors on the uniform grid over `[-limit, limit]^d` (zero bias),
/// followed by `n_random` uniform draws of weights and bias from the same box.
pub fn hypothesis_grid(d: usize, limit: f64, step: f64, n_random: usize, seed: u64) -> Vec<LinearHypothesis> {
    let ticks: Vec<f64> = {
        let count = (2.0 * limit / step).round() as usize;
        (0..=count).map(|i| -limit + i as f64 * step).collect()
    };
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    'grid: loop {
        out.push(LinearHypothesis {
            weights: idx.iter().map(|&i| ticks[i]).collect(),
            bias: 0.0,
        });
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < ticks.len() {
                continue 'grid;
            }
            *slot = 0;
        }
        break;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        out.push(LinearHypothesis {
            weights: (0..d).map(|_| rng.random_range(-limit..=limit)).collect(),
            bias: rng.random_range(-limit..=limit),
        });
    }
    out
}

/// `|F| x K` matrix of empirical risks.
pub fn risk_matrix(hypotheses: &[LinearHypothesis], sets: &[LabelledSet], loss: Loss) -> Result<Array2<f64>> {
    if hypotheses.is_empty() {
        return Err(HarnessError::NoHypotheses);
    }
    let mut risks = Array2::zeros((hypotheses.len(), sets.len()));
    for (j, set) in sets.iter().enumerate() {
        if set.labels.is_empty() {
            return Err(HarnessError::Config(format!("elementary set {j} is empty")));
        }
        if let Some(&y) = set.labels.iter().find(|&&y| y > 1) {
            return Err(HarnessError::Config(format!("label {y} is not binary")));
        }
        for (f, h) in hypotheses.iter().enumerate() {
            if h.weights.len() != set.inputs.ncols() {
                return Err(HarnessError::Config(format!(
                    "hypothesis {f} has {} weights for {}-dimensional inputs",
                    h.weights.len(),
                    set.inputs.ncols()
                )));
            }
            let total: f64 = set
                .inputs
                .rows()
                .into_iter()
                .zip(&set.labels)
                .map(|(x, &y)| loss.eval(h.score(x), y))
                .sum();
            risks[[f, j]] = total / set.labels.len() as f64;
        }
    }
    Ok(risks)
}

pub fn dominates(g: ArrayView1<'_, f64>, f: ArrayView1<'_, f64>) -> bool {
    g.iter().zip(f).all(|(a, b)| a <= b) && g.iter().zip(f).any(|(a, b)| a < b)
}

/// First hypothesis dominating row `candidate`, if any.
pub fn find_dominator(risks: ArrayView2<'_, f64>, candidate: usize) -> Option<usize> {
    let f = risks.row(candidate);
    (0..risks.nrows()).find(|&g| dominates(risks.row(g), f))
}

/// Index of the smallest `alpha`-weighted risk; ties go to the lower index.
pub fn scalarized_argmin(risks: ArrayView2<'_, f64>, alpha: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (f, row) in risks.rows().into_iter().enumerate() {
        let v: f64 = row.iter().zip(alpha).map(|(r, a)| r * a).sum();
        if v < best.1 {
            best = (f, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    /// Hypothesis that was checked.
    pub candidate: usize,
    pub is_pareto: bool,
    pub dominating_witness: Option<usize>,
    pub risks: Array2<f64>,
}

fn check_alpha(alpha: &[f64], k: usize) -> Result<()> {
    if k < 2 {
        return Err(HarnessError::Config(format!("need at least 2 elementary sets, got {k}")));
    }
    if alpha.len() != k {
        return Err(HarnessError::Config(format!("alpha has {} entries for {k} sets", alpha.len())));
    }
    let sum: f64 = alpha.iter().sum();
    if alpha.iter().any(|&a| !(a >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(HarnessError::Config("alpha must lie on the simplex".into()));
    }
    Ok(())
}

/// Checks a given candidate row of a precomputed risk matrix.
pub fn pareto_check_candidate(risks: Array2<f64>, candidate: usize) -> Result<ParetoReport> {
    if risks.nrows() == 0 {
        return Err(HarnessError::NoHypotheses);
    }
    if candidate >= risks.nrows() {
        return Err(HarnessError::Config(format!("candidate {candidate} out of range")));
    }
    let witness = find_dominator(risks.view(), candidate);
    Ok(ParetoReport {
        candidate,
        is_pareto: witness.is_none(),
        dominating_witness: witness,
        risks,
    })
}

/// Finds the scalarized risk minimizer and tests it for Pareto optimality.
pub fn pareto_check(
    hypotheses: &[LinearHypothesis],
    sets: &[LabelledSet],
    alpha: &[f64],
    loss: Loss,
) -> Result<ParetoReport> {
    check_alpha(alpha, sets.len())?;
    let risks = risk_matrix(hypotheses, sets, loss)?;
    let argmin = scalarized_argmin(risks.view(), alpha);
    pareto_check_candidate(risks, argmin)
}
