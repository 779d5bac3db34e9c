use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{GduError, Result};
use crate::scalar::Scalar;

/// Labeled samples with their domain id and a hidden elementary-component tag.
///
/// Tags are diagnostics only; nothing in training reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub inputs: Array2<T>,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    pub tags: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        inputs: Array2<T>,
        labels: Vec<usize>,
        domains: Vec<usize>,
        tags: Vec<usize>,
    ) -> Result<Self> {
        let n = inputs.nrows();
        for (what, len) in [
            ("labels", labels.len()),
            ("domains", domains.len()),
            ("tags", tags.len()),
        ] {
            if len != n {
                return Err(GduError::ShapeMismatch {
                    what: "dataset column",
                    expected: format!("{n} {what}"),
                    found: len.to_string(),
                });
            }
        }
        Ok(Self {
            inputs,
            labels,
            domains,
            tags,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            domains: idx.iter().map(|&i| self.domains[i]).collect(),
            tags: idx.iter().map(|&i| self.tags[i]).collect(),
        }
    }

    /// Sorted distinct domain ids.
    pub fn domain_ids(&self) -> Vec<usize> {
        let mut ids = self.domains.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn domain(&self, id: usize) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.domains[i] == id).collect();
        self.subset(&idx)
    }

    pub fn with_inputs(&self, inputs: Array2<T>) -> Self {
        Self {
            inputs,
            ..self.clone()
        }
    }

    pub fn concat(parts: &[&Dataset<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or(GduError::Empty("no datasets to concatenate"))?;
        let views: Vec<ArrayView2<'_, T>> = parts.iter().map(|d| d.inputs.view()).collect();
        let inputs =
            ndarray::concatenate(Axis(0), &views).map_err(|_| GduError::DimensionMismatch {
                left: first.dim(),
                right: parts
                    .iter()
                    .map(|d| d.dim())
                    .find(|&d| d != first.dim())
                    .unwrap_or(0),
            })?;
        let cat = |f: fn(&Dataset<T>) -> &Vec<usize>| {
            parts.iter().flat_map(|d| f(d).iter().copied()).collect()
        };
        Ok(Self {
            inputs,
            labels: cat(|d| &d.labels),
            domains: cat(|d| &d.domains),
            tags: cat(|d| &d.tags),
        })
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            inputs: self.inputs.mapv(|v| U::lit(v.to_f64_lossy())),
            labels: self.labels.clone(),
            domains: self.domains.clone(),
            tags: self.tags.clone(),
        }
    }

    pub fn batch(&self) -> Batch<'_, T> {
        Batch {
            inputs: self.inputs.view(),
            labels: &self.labels,
        }
    }
}

/// Training, validation and held-out target data.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits<T> {
    pub train: Dataset<T>,
    pub validation: Dataset<T>,
    pub target: Dataset<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, T> {
    pub inputs: ArrayView2<'a, T>,
    pub labels: &'a [usize],
}

impl<T> Batch<'_, T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn subset_and_concat() {
        let d = Dataset::new(
            array![[1.0], [2.0], [3.0]],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![2, 2, 3],
        )
        .unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.inputs, array![[3.0], [1.0]]);
        assert_eq!(s.domains, vec![1, 0]);
        let c = Dataset::concat(&[&d, &s]).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.domain_ids(), vec![0, 1]);
        assert_eq!(c.domain(1).len(), 2);
        assert_eq!(d.num_classes(), 2);
        assert!(Dataset::new(array![[1.0]], vec![], vec![0], vec![0]).is_err());
    }
}
