use ndarray::ArrayView1;

use crate::error::{GduError, Result};
use crate::scalar::Scalar;

pub fn softmax<T: Scalar>(logits: ArrayView1<'_, T>) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(logits)[label]`, computed with log-sum-exp.
pub fn loss_ce<T: Scalar>(logits: ArrayView1<'_, T>, label: usize) -> Result<T> {
    if logits.len() < 2 {
        return Err(GduError::InvalidConfig(format!(
            "cross-entropy needs at least two classes, got {}",
            logits.len()
        )));
    }
    if label >= logits.len() {
        return Err(GduError::InvalidConfig(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    Ok((lse - logits[label]).max(T::zero()))
}
