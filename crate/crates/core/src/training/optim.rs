use std::fmt;
use std::str::FromStr;

use crate::error::{GduError, Result};
use crate::scalar::Scalar;
use crate::training::model::ParamSlot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(GduError::InvalidConfig(format!(
                "unknown optimizer `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-7),
        }
    }
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(GduError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b >= T::zero() && b < T::one()) {
                return Err(GduError::InvalidConfig(format!(
                    "adam {name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(self.eps > T::zero()) {
            return Err(GduError::InvalidConfig(format!(
                "adam eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// First-order optimizer over named parameter blocks. Moment buffers are keyed by
/// block position, so the block list must keep the same layout between steps.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    cfg: OptimizerConfig<T>,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(cfg: OptimizerConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, slots: &mut [ParamSlot<'_, T>], grads: &[(String, &[T])]) -> Result<()> {
        if slots.len() != grads.len() {
            return Err(GduError::ShapeMismatch {
                what: "gradient blocks",
                expected: slots.len().to_string(),
                found: grads.len().to_string(),
            });
        }
        for (s, (name, g)) in slots.iter().zip(grads) {
            if &s.name != name || s.values.len() != g.len() {
                return Err(GduError::ShapeMismatch {
                    what: "gradient block",
                    expected: format!("{} ({})", s.name, s.values.len()),
                    found: format!("{name} ({})", g.len()),
                });
            }
        }
        if self.m.is_empty() {
            self.m = slots
                .iter()
                .map(|s| vec![T::zero(); s.values.len()])
                .collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let lr = self.cfg.learning_rate;
        match self.cfg.kind {
            OptimizerKind::Sgd => {
                for (s, (_, g)) in slots.iter_mut().zip(grads) {
                    for (p, &gv) in s.values.iter_mut().zip(g.iter()) {
                        *p -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let OptimizerConfig {
                    beta1, beta2, eps, ..
                } = self.cfg;
                let c1 = T::one() - beta1.powi(self.step);
                let c2 = T::one() - beta2.powi(self.step);
                for ((s, (_, g)), (m, v)) in slots
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for (k, (p, &gv)) in s.values.iter_mut().zip(g.iter()).enumerate() {
                        m[k] = beta1 * m[k] + (T::one() - beta1) * gv;
                        v[k] = beta2 * v[k] + (T::one() - beta2) * gv * gv;
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
