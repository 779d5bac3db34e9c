//! The gated domain layer.
//!
//! `M` domain bases `V_j` (each `N` vectors in `R^e`) are compared with an
//! input's kernel embedding to produce gating weights `beta_j`; the layer
//! output is `sum_j beta_j f_j(x)` over `M` learning machines.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GduError, Result};
use crate::kernel::{sq_dist, KernelConfig};
use crate::rkhs::mean_kernel;
use crate::scalar::Scalar;

/// Expected kernel value between two independently initialized basis vectors.
pub const INIT_CROSS_KERNEL_TARGET: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GatingMode {
    /// RKHS cosine similarity followed by a kernel softmax.
    Cs,
    /// Negative squared MMD followed by a kernel softmax.
    Mmd,
    /// Unnormalized projection coefficients `<phi(x), mu_j> / ||mu_j||^2`.
    Projection,
}

impl GatingMode {
    pub fn is_geometry(self) -> bool {
        !matches!(self, GatingMode::Projection)
    }

    pub const ALL: [GatingMode; 3] = [GatingMode::Cs, GatingMode::Mmd, GatingMode::Projection];
}

impl fmt::Display for GatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatingMode::Cs => "cs",
            GatingMode::Mmd => "mmd",
            GatingMode::Projection => "projection",
        })
    }
}

impl FromStr for GatingMode {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cs" => Ok(GatingMode::Cs),
            "mmd" => Ok(GatingMode::Mmd),
            "projection" | "proj" => Ok(GatingMode::Projection),
            other => Err(GduError::InvalidConfig(format!(
                "unknown gating mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub(crate) fn derivative_from_output<T: Scalar>(self, out: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - out * out,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(GduError::InvalidConfig(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

/// The vectors `V_j = {v_1, ..., v_N}` of one elementary domain basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBasis<T> {
    vectors: Array2<T>,
}

impl<T: Scalar> DomainBasis<T> {
    pub fn new(vectors: Array2<T>) -> Result<Self> {
        if vectors.nrows() == 0 {
            return Err(GduError::Empty("domain basis needs at least one vector"));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(GduError::InvalidConfig(
                "domain basis has non-finite entries".into(),
            ));
        }
        Ok(Self {
            vectors: vectors.as_standard_layout().to_owned(),
        })
    }

    pub fn vectors(&self) -> ArrayView2<'_, T> {
        self.vectors.view()
    }

    pub(crate) fn vectors_mut(&mut self) -> &mut Array2<T> {
        &mut self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Coordinate-wise mean of the basis vectors.
    pub fn centroid(&self) -> Array1<T> {
        self.vectors
            .mean_axis(ndarray::Axis(0))
            .expect("basis is non-empty")
    }
}

/// An affine head `act(x W + b)` mapping `R^e` to `R^C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningMachine<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> LearningMachine<T> {
    pub fn new(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(GduError::ShapeMismatch {
                what: "machine bias",
                expected: weights.ncols().to_string(),
                found: bias.len().to_string(),
            });
        }
        if weights.ncols() == 0 {
            return Err(GduError::Empty(
                "learning machine needs at least one output",
            ));
        }
        Ok(Self {
            weights: weights.as_standard_layout().to_owned(),
            bias,
            activation,
        })
    }

    /// Weights drawn from `U(-1/sqrt(e), 1/sqrt(e))`, zero bias.
    pub fn init<R: Rng>(e: usize, c: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (e.max(1) as f64).sqrt();
        let weights = Array2::from_shape_fn((e, c), |_| T::lit(rng.random_range(-bound..bound)));
        Self {
            weights,
            bias: Array1::zeros(c),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn apply(&self, x: ArrayView1<'_, T>) -> Array1<T> {
        let mut z = self.bias.clone();
        for (xi, wrow) in x.iter().zip(self.weights.rows()) {
            z.zip_mut_with(&wrow, |zc, &w| *zc += *xi * w);
        }
        z.mapv_inplace(|v| self.activation.apply(v));
        z
    }
}

/// Per-sample gating rows `beta` (b x M).
#[derive(Debug, Clone, PartialEq)]
pub struct GatingWeights<T> {
    beta: Array2<T>,
}

impl<T: Scalar> GatingWeights<T> {
    pub fn new(beta: Array2<T>) -> Self {
        Self { beta }
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.beta.view()
    }

    pub fn rows(&self) -> usize {
        self.beta.nrows()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.beta
    }
}

/// Dimensions used by [`GduLayer::init_layer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    /// Number of elementary domain bases.
    pub m: usize,
    /// Vectors per basis.
    pub n: usize,
    /// Feature dimension.
    pub e: usize,
    /// Output dimension.
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GduLayer<T> {
    bases: Vec<DomainBasis<T>>,
    machines: Vec<LearningMachine<T>>,
    kernel: KernelConfig<T>,
    mode: GatingMode,
    kappa: T,
}

/// Numerically stable `softmax(kappa * h)`.
pub fn kernel_softmax<T: Scalar>(h: &[T], kappa: T) -> Vec<T> {
    let max = h.iter().map(|&v| kappa * v).fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = h.iter().map(|&v| (kappa * v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Per-coordinate standard deviation for basis initialization.
///
/// For `v, w ~ N(0, s^2 I_e)` independent, `E[k(v, w)] = (1 + 2 s^2 / sigma^2)^(-e/2)`;
/// this solves for `s` so that the expectation equals `target`.
pub fn basis_init_std(sigma: f64, e: usize, target: f64) -> f64 {
    let ratio = target.powf(-2.0 / e.max(1) as f64) - 1.0;
    (sigma * sigma * ratio / 2.0).sqrt()
}

impl<T: Scalar> GduLayer<T> {
    pub fn new(
        bases: Vec<DomainBasis<T>>,
        machines: Vec<LearningMachine<T>>,
        kernel: KernelConfig<T>,
        mode: GatingMode,
        kappa: T,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(GduError::Empty("layer needs at least one basis"));
        }
        if bases.len() != machines.len() {
            return Err(GduError::ShapeMismatch {
                what: "machine count",
                expected: bases.len().to_string(),
                found: machines.len().to_string(),
            });
        }
        let (n, e) = (bases[0].len(), bases[0].dim());
        if let Some(b) = bases.iter().find(|b| b.len() != n || b.dim() != e) {
            return Err(GduError::ShapeMismatch {
                what: "domain basis",
                expected: format!("{n}x{e}"),
                found: format!("{}x{}", b.len(), b.dim()),
            });
        }
        let c = machines[0].output_dim();
        if let Some(f) = machines
            .iter()
            .find(|f| f.input_dim() != e || f.output_dim() != c)
        {
            return Err(GduError::ShapeMismatch {
                what: "learning machine",
                expected: format!("{e}x{c}"),
                found: format!("{}x{}", f.input_dim(), f.output_dim()),
            });
        }
        if mode.is_geometry() && !(kappa > T::zero() && kappa.is_finite()) {
            return Err(GduError::InvalidConfig(format!(
                "softmax softness kappa must be positive, got {kappa}"
            )));
        }
        Ok(Self {
            bases,
            machines,
            kernel,
            mode,
            kappa,
        })
    }

    /// Random layer: Gaussian basis vectors scaled by [`basis_init_std`] and
    /// fan-in uniform machine weights. Deterministic in `seed`.
    pub fn init_layer(
        shape: LayerShape,
        seed: u64,
        mode: GatingMode,
        kernel: KernelConfig<T>,
        kappa: T,
        activation: Activation,
    ) -> Result<Self> {
        let LayerShape { m, n, e, c } = shape;
        if m == 0 || n == 0 || e == 0 || c == 0 {
            return Err(GduError::InvalidConfig(format!(
                "layer dimensions must be positive, got M={m} N={n} e={e} C={c}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = basis_init_std(kernel.sigma().to_f64_lossy(), e, INIT_CROSS_KERNEL_TARGET);
        let bases = (0..m)
            .map(|_| {
                let v = Array2::from_shape_fn((n, e), |_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(std * z)
                });
                DomainBasis::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let machines = (0..m)
            .map(|_| LearningMachine::init(e, c, activation, &mut rng))
            .collect();
        Self::new(bases, machines, kernel, mode, kappa)
    }

    pub fn bases(&self) -> &[DomainBasis<T>] {
        &self.bases
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [DomainBasis<T>], &mut [LearningMachine<T>]) {
        (&mut self.bases, &mut self.machines)
    }

    pub fn machines(&self) -> &[LearningMachine<T>] {
        &self.machines
    }

    pub fn kernel(&self) -> &KernelConfig<T> {
        &self.kernel
    }

    pub fn mode(&self) -> GatingMode {
        self.mode
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn basis_size(&self) -> usize {
        self.bases[0].len()
    }

    pub fn feature_dim(&self) -> usize {
        self.bases[0].dim()
    }

    pub fn output_dim(&self) -> usize {
        self.machines[0].output_dim()
    }

    /// `K_jl = <mu_{V_j}, mu_{V_l}>_H`.
    pub fn gram_bases(&self) -> Array2<T> {
        let m = self.bases.len();
        let mut k = Array2::zeros((m, m));
        for j in 0..m {
            for l in j..m {
                let v = mean_kernel(
                    self.bases[j].vectors(),
                    self.bases[l].vectors(),
                    &self.kernel,
                );
                k[[j, l]] = v;
                k[[l, j]] = v;
            }
        }
        k
    }

    pub(crate) fn basis_norms_sq(&self) -> Vec<T> {
        self.bases
            .iter()
            .map(|b| mean_kernel(b.vectors(), b.vectors(), &self.kernel))
            .collect()
    }

    /// `<phi(x), mu_{V_j}>` for every basis.
    pub(crate) fn inner_with_bases(&self, x: ArrayView1<'_, T>) -> Vec<T> {
        let inv_n = T::one() / T::from_usize_lossy(self.basis_size());
        self.bases
            .iter()
            .map(|b| {
                b.vectors()
                    .rows()
                    .into_iter()
                    .map(|v| self.kernel.eval_sq_dist(sq_dist(x, v)))
                    .sum::<T>()
                    * inv_n
            })
            .collect()
    }

    /// Gate from inner products `<mu, mu_j>`, the embedding's own squared norm and
    /// the basis squared norms.
    pub(crate) fn gate_from_inner(&self, inner: &[T], self_norm_sq: T, norms: &[T]) -> Vec<T> {
        match self.mode {
            GatingMode::Projection => inner.iter().zip(norms).map(|(&a, &s)| a / s).collect(),
            GatingMode::Cs => {
                let h: Vec<T> = inner
                    .iter()
                    .zip(norms)
                    .map(|(&a, &s)| a / (self_norm_sq.sqrt() * s.sqrt()))
                    .collect();
                kernel_softmax(&h, self.kappa)
            }
            GatingMode::Mmd => {
                let h: Vec<T> = inner
                    .iter()
                    .zip(norms)
                    .map(|(&a, &s)| -(self_norm_sq - a - a + s))
                    .collect();
                kernel_softmax(&h, self.kappa)
            }
        }
    }

    fn check_dim(&self, e: usize) -> Result<()> {
        if e != self.feature_dim() {
            return Err(GduError::DimensionMismatch {
                left: e,
                right: self.feature_dim(),
            });
        }
        Ok(())
    }

    /// Gating weights for one feature vector.
    pub fn gate(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        self.check_dim(x.len())?;
        let norms = self.basis_norms_sq();
        let inner = self.inner_with_bases(x);
        Ok(Array1::from(self.gate_from_inner(&inner, T::one(), &norms)))
    }

    /// One gating row shared by the whole batch, using the batch embedding.
    pub fn gate_batch(&self, x: ArrayView2<'_, T>) -> Result<Array1<T>> {
        if x.nrows() == 0 {
            return Err(GduError::Empty("gating batch"));
        }
        self.check_dim(x.ncols())?;
        let norms = self.basis_norms_sq();
        let inner: Vec<T> = self
            .bases
            .iter()
            .map(|b| mean_kernel(x, b.vectors(), &self.kernel))
            .collect();
        let self_norm = mean_kernel(x, x, &self.kernel);
        Ok(Array1::from(
            self.gate_from_inner(&inner, self_norm, &norms),
        ))
    }

    /// Per-sample gating rows for a batch.
    pub fn gate_rows(&self, x: ArrayView2<'_, T>) -> Result<GatingWeights<T>> {
        self.check_dim(x.ncols())?;
        let norms = self.basis_norms_sq();
        let mut beta = Array2::zeros((x.nrows(), self.num_bases()));
        for (i, xi) in x.rows().into_iter().enumerate() {
            let inner = self.inner_with_bases(xi);
            let row = self.gate_from_inner(&inner, T::one(), &norms);
            beta.row_mut(i).assign(&Array1::from(row));
        }
        Ok(GatingWeights::new(beta))
    }

    /// `sum_j beta_j f_j(x)` with externally supplied gates.
    pub fn forward_with_gates(
        &self,
        x: ArrayView1<'_, T>,
        beta: ArrayView1<'_, T>,
    ) -> Result<Array1<T>> {
        self.check_dim(x.len())?;
        if beta.len() != self.num_bases() {
            return Err(GduError::ShapeMismatch {
                what: "gating row",
                expected: self.num_bases().to_string(),
                found: beta.len().to_string(),
            });
        }
        let mut out = Array1::zeros(self.output_dim());
        for (f, &b) in self.machines.iter().zip(beta.iter()) {
            out.scaled_add(b, &f.apply(x));
        }
        Ok(out)
    }

    pub fn forward(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let beta = self.gate(x)?;
        self.forward_with_gates(x, beta.view())
    }

    /// Batch forward pass. With `batch_gating` every row uses the gate of the
    /// whole batch embedding (test-time batch adaptation); otherwise each row is
    /// gated on its own.
    pub fn forward_batch(&self, x: ArrayView2<'_, T>, batch_gating: bool) -> Result<Array2<T>> {
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        if batch_gating {
            let beta = self.gate_batch(x)?;
            for (i, xi) in x.rows().into_iter().enumerate() {
                out.row_mut(i)
                    .assign(&self.forward_with_gates(xi, beta.view())?);
            }
        } else {
            let beta = self.gate_rows(x)?;
            for (i, xi) in x.rows().into_iter().enumerate() {
                out.row_mut(i)
                    .assign(&self.forward_with_gates(xi, beta.view().row(i))?);
            }
        }
        Ok(out)
    }
}
