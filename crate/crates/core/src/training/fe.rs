//! Multi-layer perceptron feature extractor `h_xi: R^d -> R^e`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{GduError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Nonlinearity {
    Identity,
    Relu,
    #[default]
    Tanh,
}

impl Nonlinearity {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Nonlinearity::Identity => z,
            Nonlinearity::Relu => z.max(T::zero()),
            Nonlinearity::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative_from_output<T: Scalar>(self, h: T) -> T {
        match self {
            Nonlinearity::Identity => T::one(),
            Nonlinearity::Relu => {
                if h > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Nonlinearity::Tanh => T::one() - h * h,
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::Relu => "relu",
            Nonlinearity::Tanh => "tanh",
        })
    }
}

impl FromStr for Nonlinearity {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Nonlinearity::Identity),
            "relu" => Ok(Nonlinearity::Relu),
            "tanh" => Ok(Nonlinearity::Tanh),
            other => Err(GduError::InvalidConfig(format!(
                "unknown nonlinearity `{other}`"
            ))),
        }
    }
}

/// `h = act(x W + b)` with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

/// Gradient of a dense block; also used for learning machines.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> DenseGrad<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            weights: Array2::zeros((rows, cols)),
            bias: Array1::zeros(cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor<T> {
    input_dim: usize,
    layers: Vec<DenseLayer<T>>,
    nonlinearity: Nonlinearity,
}

impl<T: Scalar> FeatureExtractor<T> {
    pub fn new(
        input_dim: usize,
        layers: Vec<DenseLayer<T>>,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        let mut dim = input_dim;
        for (k, l) in layers.iter().enumerate() {
            if l.weights.nrows() != dim
                || l.bias.len() != l.weights.ncols()
                || l.weights.ncols() == 0
            {
                return Err(GduError::ShapeMismatch {
                    what: "feature extractor layer",
                    expected: format!("layer {k} with {dim} inputs"),
                    found: format!(
                        "{}x{} weights, {} bias",
                        l.weights.nrows(),
                        l.weights.ncols(),
                        l.bias.len()
                    ),
                });
            }
            dim = l.weights.ncols();
        }
        Ok(Self {
            input_dim,
            layers: layers
                .into_iter()
                .map(|l| DenseLayer {
                    weights: l.weights.as_standard_layout().to_owned(),
                    bias: l.bias,
                })
                .collect(),
            nonlinearity,
        })
    }

    /// Identity map on `R^dim` (no trainable parameters).
    pub fn identity(dim: usize) -> Self {
        Self {
            input_dim: dim,
            layers: Vec::new(),
            nonlinearity: Nonlinearity::Identity,
        }
    }

    /// Random MLP with layer widths `sizes = [input, hidden.., output]`, weights from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and zero biases.
    pub fn init<R: Rng>(sizes: &[usize], nonlinearity: Nonlinearity, rng: &mut R) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(GduError::InvalidConfig(format!(
                "invalid layer sizes {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                DenseLayer {
                    weights: Array2::from_shape_fn((w[0], w[1]), |_| {
                        T::lit(rng.random_range(-bound..bound))
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self::new(sizes[0], layers, nonlinearity)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map_or(self.input_dim, |l| l.weights.ncols())
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn forward(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let out = self.forward_batch(x.insert_axis(Axis(0)))?;
        Ok(out.row(0).to_owned())
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self
            .forward_cached(x)?
            .pop()
            .expect("input activation present"))
    }

    /// All activations `[x, h_1, .., h_L]`.
    pub(crate) fn forward_cached(&self, x: ArrayView2<'_, T>) -> Result<Vec<Array2<T>>> {
        if x.ncols() != self.input_dim {
            return Err(GduError::DimensionMismatch {
                left: x.ncols(),
                right: self.input_dim,
            });
        }
        let mut acts = vec![x.to_owned()];
        for l in &self.layers {
            let mut z = acts.last().expect("non-empty").dot(&l.weights);
            z += &l.bias;
            z.mapv_inplace(|v| self.nonlinearity.apply(v));
            acts.push(z);
        }
        Ok(acts)
    }

    /// Backpropagates `d_out` (gradient w.r.t. the final activation) through the
    /// cached activations.
    pub(crate) fn backward(&self, acts: &[Array2<T>], d_out: Array2<T>) -> Vec<DenseGrad<T>> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut dh = d_out;
        for (k, l) in self.layers.iter().enumerate().rev() {
            let h = &acts[k + 1];
            let mut dz = dh;
            dz.zip_mut_with(h, |d, &hv| {
                *d *= self.nonlinearity.derivative_from_output(hv)
            });
            let weights = acts[k].t().dot(&dz);
            let bias = dz.sum_axis(Axis(0));
            dh = dz.dot(&l.weights.t());
            grads.push(DenseGrad { weights, bias });
        }
        grads.reverse();
        grads
    }
}

/// Forward pass of a feature extractor on a single input.
pub fn fe_forward<T: Scalar>(x: ArrayView1<'_, T>, fe: &FeatureExtractor<T>) -> Result<Array1<T>> {
    fe.forward(x)
}
