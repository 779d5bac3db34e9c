//! Raw embedding export for external visualization.

use std::fmt::Write as _;

use gdu_core::training::Model;
use gdu_core::Dataset;
use ndarray::Array2;

use crate::error::{HarnessError, Result};

/// CSV with one `sample` row per input (features, label, domain, gating weights)
/// followed by one `basis` row per domain basis holding the mean of its vectors
/// and the gating weights of that mean. Basis rows leave label and domain empty.
pub fn export_embeddings(model: &Model<f64>, data: &Dataset<f64>) -> Result<String> {
    let layer = model
        .head
        .layer()
        .ok_or_else(|| HarnessError::Config("embedding export needs a GDU model".into()))?;
    let feats = model.features(data.inputs.view())?;
    let beta = layer.gate_rows(feats.view())?.into_inner();
    let (e, m) = (layer.feature_dim(), layer.num_bases());
    let mut centroids = Array2::zeros((m, e));
    for (j, b) in layer.bases().iter().enumerate() {
        centroids.row_mut(j).assign(&b.centroid());
    }
    let centroid_beta = layer.gate_rows(centroids.view())?.into_inner();

    let mut out = String::from("kind,index,label,domain");
    for k in 0..e {
        let _ = write!(out, ",f{k}");
    }
    for j in 0..m {
        let _ = write!(out, ",beta{j}");
    }
    out.push('\n');
    let mut row = |kind: &str, index: usize, label: String, domain: String, f: &[f64], b: &[f64]| {
        let _ = write!(out, "{kind},{index},{label},{domain}");
        for v in f.iter().chain(b) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    };
    for i in 0..data.len() {
        row(
            "sample",
            i,
            data.labels[i].to_string(),
            data.domains[i].to_string(),
            feats.row(i).as_slice().expect("standard layout"),
            beta.row(i).as_slice().expect("standard layout"),
        );
    }
    for j in 0..m {
        row(
            "basis",
            j,
            String::new(),
            String::new(),
            centroids.row(j).as_slice().expect("standard layout"),
            centroid_beta.row(j).as_slice().expect("standard layout"),
        );
    }
    Ok(out)
}
