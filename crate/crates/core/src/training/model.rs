use ndarray::{Array1, Array2, ArrayView2};

use crate::checkpoint::{
    read_layer, read_machine, write_layer, write_machine, CheckpointReader, CheckpointWriter,
};
use crate::error::{GduError, Result};
use crate::layer::{GduLayer, LearningMachine};
use crate::scalar::Scalar;
use crate::training::data::Dataset;
use crate::training::fe::{DenseLayer, FeatureExtractor};

/// Prediction head on top of the feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub enum Head<T> {
    /// Gated domain layer.
    Gdu(GduLayer<T>),
    /// ERM baseline with one learning machine.
    Single(LearningMachine<T>),
    /// ERM baseline averaging several learning machines uniformly.
    Ensemble(Vec<LearningMachine<T>>),
}

impl<T: Scalar> Head<T> {
    pub fn machines(&self) -> &[LearningMachine<T>] {
        match self {
            Head::Gdu(l) => l.machines(),
            Head::Single(f) => std::slice::from_ref(f),
            Head::Ensemble(fs) => fs,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.machines()[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.machines()[0].output_dim()
    }

    pub fn layer(&self) -> Option<&GduLayer<T>> {
        match self {
            Head::Gdu(l) => Some(l),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Head::Gdu(_) => "gdu",
            Head::Single(_) => "single",
            Head::Ensemble(_) => "ensemble",
        }
    }

    /// Head output for one feature row.
    pub fn forward(&self, x: ndarray::ArrayView1<'_, T>) -> Result<Array1<T>> {
        match self {
            Head::Gdu(l) => l.forward(x),
            Head::Single(f) => Ok(f.apply(x)),
            Head::Ensemble(fs) => {
                let mut out = Array1::zeros(fs[0].output_dim());
                for f in fs {
                    out += &f.apply(x);
                }
                Ok(out / T::from_usize_lossy(fs.len()))
            }
        }
    }
}

/// Feature extractor plus head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub fe: FeatureExtractor<T>,
    pub head: Head<T>,
}

/// A named, mutable view of one trainable parameter block.
pub struct ParamSlot<'a, T> {
    pub name: String,
    pub values: &'a mut [T],
}

fn slot<'a, T>(name: String, values: &'a mut [T]) -> ParamSlot<'a, T> {
    ParamSlot { name, values }
}

impl<T: Scalar> Model<T> {
    pub fn new(fe: FeatureExtractor<T>, head: Head<T>) -> Result<Self> {
        if let Head::Ensemble(fs) = &head {
            if fs.is_empty() {
                return Err(GduError::Empty("ensemble head needs at least one machine"));
            }
        }
        let machines = head.machines();
        let (e, c) = (machines[0].input_dim(), machines[0].output_dim());
        if machines
            .iter()
            .any(|f| f.input_dim() != e || f.output_dim() != c)
        {
            return Err(GduError::InvalidConfig(
                "head machines disagree in shape".into(),
            ));
        }
        if fe.output_dim() != e {
            return Err(GduError::DimensionMismatch {
                left: fe.output_dim(),
                right: e,
            });
        }
        if c < 2 {
            return Err(GduError::InvalidConfig(
                "classification needs at least two outputs".into(),
            ));
        }
        Ok(Self { fe, head })
    }

    pub fn num_classes(&self) -> usize {
        self.head.output_dim()
    }

    pub fn features(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.fe.forward_batch(x)
    }

    /// Logits with per-sample gating.
    pub fn predict_logits(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let feats = self.features(x)?;
        self.head_logits(feats.view())
    }

    pub(crate) fn head_logits(&self, feats: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if let Head::Gdu(l) = &self.head {
            return l.forward_batch(feats, false);
        }
        let mut out = Array2::zeros((feats.nrows(), self.num_classes()));
        for (i, xi) in feats.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.head.forward(xi)?);
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_logits(x)?))
    }

    pub fn accuracy(&self, data: &Dataset<T>) -> Result<f64> {
        if data.is_empty() {
            return Err(GduError::Empty("accuracy of an empty dataset"));
        }
        let pred = self.predict(data.inputs.view())?;
        Ok(accuracy_of(&pred, &data.labels))
    }

    /// Trainable blocks in a fixed order: FE layers (when included), bases, machines.
    pub fn param_slots(&mut self, include_fe: bool) -> Vec<ParamSlot<'_, T>> {
        let mut out = Vec::new();
        if include_fe {
            for (k, l) in self.fe.layers_mut().iter_mut().enumerate() {
                let DenseLayer { weights, bias } = l;
                out.push(slot(
                    format!("fe.{k}.weights"),
                    weights.as_slice_mut().expect("standard layout"),
                ));
                out.push(slot(
                    format!("fe.{k}.bias"),
                    bias.as_slice_mut().expect("contiguous"),
                ));
            }
        }
        let (bases, machines) = match &mut self.head {
            Head::Gdu(l) => l.parts_mut(),
            Head::Single(f) => (&mut [][..], std::slice::from_mut(f)),
            Head::Ensemble(fs) => (&mut [][..], &mut fs[..]),
        };
        for (j, b) in bases.iter_mut().enumerate() {
            out.push(slot(
                format!("basis.{j}"),
                b.vectors_mut().as_slice_mut().expect("standard layout"),
            ));
        }
        for (j, f) in machines.iter_mut().enumerate() {
            let LearningMachine { weights, bias, .. } = f;
            out.push(slot(
                format!("machine.{j}.weights"),
                weights.as_slice_mut().expect("standard layout"),
            ));
            out.push(slot(
                format!("machine.{j}.bias"),
                bias.as_slice_mut().expect("contiguous"),
            ));
        }
        out
    }

    pub fn to_checkpoint(&self) -> String {
        let mut w = CheckpointWriter::new();
        w.text("model.head", self.head.kind());
        w.usize("fe.input_dim", self.fe.input_dim());
        w.text("fe.nonlinearity", &self.fe.nonlinearity().to_string());
        w.usize("fe.layers", self.fe.layers().len());
        for (k, l) in self.fe.layers().iter().enumerate() {
            w.matrix(&format!("fe.{k}.weights"), &l.weights);
            w.vector(&format!("fe.{k}.bias"), &l.bias);
        }
        match &self.head {
            Head::Gdu(l) => write_layer(&mut w, "layer", l),
            Head::Single(f) => write_machine(&mut w, "head", f),
            Head::Ensemble(fs) => {
                w.usize("heads", fs.len());
                for (j, f) in fs.iter().enumerate() {
                    write_machine(&mut w, &format!("heads.{j}"), f);
                }
            }
        }
        w.finish()
    }

    pub fn from_checkpoint(input: &str) -> Result<Self> {
        let r = CheckpointReader::parse(input)?;
        let layers = (0..r.usize("fe.layers")?)
            .map(|k| {
                Ok(DenseLayer {
                    weights: r.matrix(&format!("fe.{k}.weights"))?,
                    bias: r.vector(&format!("fe.{k}.bias"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fe = FeatureExtractor::new(
            r.usize("fe.input_dim")?,
            layers,
            r.text("fe.nonlinearity")?.parse()?,
        )?;
        let head = match r.text("model.head")? {
            "gdu" => Head::Gdu(read_layer(&r, "layer")?),
            "single" => Head::Single(read_machine(&r, "head")?),
            "ensemble" => Head::Ensemble(
                (0..r.usize("heads")?)
                    .map(|j| read_machine(&r, &format!("heads.{j}")))
                    .collect::<Result<Vec<_>>>()?,
            ),
            other => return Err(GduError::parse(0, format!("unknown head kind `{other}`"))),
        };
        Self::new(fe, head)
    }
}

pub fn argmax_rows<T: Scalar>(logits: &Array2<T>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy_of(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len().max(1) as f64
}
