//! Domain-basis regularizers: reconstruction (OLS), orthogonality and L1.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{GduError, Result};
use crate::layer::{GatingMode, GatingWeights, GduLayer};
use crate::rkhs::clamp_sq_norm;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OrthVariant {
    /// Soft orthogonality `||K - I||_F^2`.
    So,
    /// Spectral norm `||K - I||_2`.
    #[default]
    Srip,
    /// Mutual coherence `max_{i != j} |K_ij|`.
    Mc,
}

impl fmt::Display for OrthVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrthVariant::So => "so",
            OrthVariant::Srip => "srip",
            OrthVariant::Mc => "mc",
        })
    }
}

impl FromStr for OrthVariant {
    type Err = GduError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "so" => Ok(OrthVariant::So),
            "srip" => Ok(OrthVariant::Srip),
            "mc" => Ok(OrthVariant::Mc),
            other => Err(GduError::InvalidConfig(format!(
                "unknown orthogonality variant `{other}`"
            ))),
        }
    }
}

/// Regularization weights. Geometry gating uses `lambda_ols` and `lambda_l1`;
/// projection gating uses `lambda_ols` and `lambda_orth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegConfig<T> {
    pub lambda_ols: T,
    pub lambda_orth: T,
    pub lambda_l1: T,
    pub orth_variant: OrthVariant,
}

impl<T: Scalar> RegConfig<T> {
    pub fn none() -> Self {
        Self {
            lambda_ols: T::zero(),
            lambda_orth: T::zero(),
            lambda_l1: T::zero(),
            orth_variant: OrthVariant::Srip,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_ols", self.lambda_ols),
            ("lambda_orth", self.lambda_orth),
            ("lambda_l1", self.lambda_l1),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(GduError::InvalidConfig(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Effective weights `(ols, l1, orth)` for a gating mode.
    pub fn weights_for(&self, mode: GatingMode) -> (T, T, T) {
        if mode.is_geometry() {
            (self.lambda_ols, self.lambda_l1, T::zero())
        } else {
            (self.lambda_ols, T::zero(), self.lambda_orth)
        }
    }
}

impl<T: Scalar> Default for RegConfig<T> {
    fn default() -> Self {
        Self {
            lambda_ols: T::lit(1e-3),
            lambda_orth: T::lit(1e-3),
            lambda_l1: T::lit(1e-3),
            orth_variant: OrthVariant::Srip,
        }
    }
}

/// Unweighted regularizer values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OmegaParts<T> {
    pub ols: T,
    pub orth: T,
    pub l1: T,
}

pub(crate) fn check_beta<T: Scalar>(rows: usize, beta: ArrayView2<'_, T>, m: usize) -> Result<()> {
    if beta.nrows() != rows || beta.ncols() != m {
        return Err(GduError::ShapeMismatch {
            what: "gating weights",
            expected: format!("{rows}x{m}"),
            found: format!("{}x{}", beta.nrows(), beta.ncols()),
        });
    }
    Ok(())
}

/// Per-sample reconstruction residual `1 - 2 beta.a + beta^T K beta`.
pub(crate) fn ols_residual<T: Scalar>(beta: &[T], inner: &[T], k: &Array2<T>) -> T {
    let m = beta.len();
    let mut r = T::one();
    for j in 0..m {
        r -= T::lit(2.0) * beta[j] * inner[j];
        for l in 0..m {
            r += beta[j] * beta[l] * k[[j, l]];
        }
    }
    r
}

/// `(1/b) sum_i || phi(x_i) - sum_j beta_ij mu_{V_j} ||_H^2`, kernel-trick expanded.
pub fn omega_ols<T: Scalar>(
    x: ArrayView2<'_, T>,
    beta: &GatingWeights<T>,
    layer: &GduLayer<T>,
) -> Result<T> {
    if x.nrows() == 0 {
        return Err(GduError::Empty("regularizer batch"));
    }
    if x.ncols() != layer.feature_dim() {
        return Err(GduError::DimensionMismatch {
            left: x.ncols(),
            right: layer.feature_dim(),
        });
    }
    check_beta(x.nrows(), beta.view(), layer.num_bases())?;
    let k = layer.gram_bases();
    let mut total = T::zero();
    for (xi, bi) in x.rows().into_iter().zip(beta.view().rows()) {
        let inner = layer.inner_with_bases(xi);
        let b: Vec<T> = bi.to_vec();
        total += clamp_sq_norm(ols_residual(&b, &inner, &k))?;
    }
    Ok(total / T::from_usize_lossy(x.nrows()))
}

/// Gram matrix of the basis embeddings.
pub fn gram_bases<T: Scalar>(layer: &GduLayer<T>) -> Array2<T> {
    layer.gram_bases()
}

/// Relative change between successive power-iteration vectors that counts as converged.
fn power_tolerance<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::epsilon().powf(T::lit(0.25))
}

pub const POWER_MAX_ITERS: usize = 10_000;

/// Spectral norm of a symmetric matrix by power iteration on `A^2`.
///
/// Returns `(sigma, u, v)` with `u` the unit top singular vector and `v = A u / sigma`
/// (zero vectors when `A = 0`). The start vector is the normalized all-ones vector,
/// falling back to a basis vector when that is in the null space.
pub fn spectral_norm_sym<T: Scalar>(a: ArrayView2<'_, T>) -> (T, Array1<T>, Array1<T>) {
    let m = a.nrows();
    let matvec = |u: &Array1<T>| a.dot(u);
    let norm = |u: &Array1<T>| u.iter().map(|&v| v * v).sum::<T>().sqrt();
    let tiny = T::min_positive_value().sqrt();

    let mut start = Array1::from_elem(m, T::one() / T::from_usize_lossy(m).sqrt());
    if norm(&matvec(&start)) <= tiny {
        // all-ones may lie in the null space; try unit vectors
        let pick = (0..m).find(|&i| a.row(i).iter().any(|v| v.abs() > tiny));
        match pick {
            Some(i) => {
                start = Array1::zeros(m);
                start[i] = T::one();
            }
            None => return (T::zero(), Array1::zeros(m), Array1::zeros(m)),
        }
    }
    let tol = power_tolerance::<T>();
    let mut u = start;
    for _ in 0..POWER_MAX_ITERS {
        let w = matvec(&matvec(&u));
        let n = norm(&w);
        if n <= tiny {
            break;
        }
        let next = w / n;
        let delta = norm(&(&next - &u));
        u = next;
        if delta <= tol {
            break;
        }
    }
    let au = matvec(&u);
    let sigma = norm(&au);
    if sigma <= tiny {
        return (T::zero(), Array1::zeros(m), Array1::zeros(m));
    }
    let v = au / sigma;
    (sigma, u, v)
}

fn check_square<T: Scalar>(k: ArrayView2<'_, T>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(GduError::NonSquare {
            rows: k.nrows(),
            cols: k.ncols(),
        });
    }
    Ok(())
}

fn minus_identity<T: Scalar>(k: ArrayView2<'_, T>) -> Array2<T> {
    let mut a = k.to_owned();
    for i in 0..a.nrows() {
        a[[i, i]] -= T::one();
    }
    a
}

/// Orthogonality penalty on a basis Gram matrix.
pub fn omega_orth<T: Scalar>(k: ArrayView2<'_, T>, variant: OrthVariant) -> Result<T> {
    check_square(k)?;
    Ok(match variant {
        OrthVariant::So => minus_identity(k).iter().map(|&v| v * v).sum(),
        OrthVariant::Srip => spectral_norm_sym(minus_identity(k).view()).0,
        OrthVariant::Mc => mutual_coherence(k).0,
    })
}

/// `max_{i != j} |K_ij|` and the first index attaining it.
pub(crate) fn mutual_coherence<T: Scalar>(k: ArrayView2<'_, T>) -> (T, Option<(usize, usize)>) {
    let mut best = T::zero();
    let mut at = None;
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            if i != j && (at.is_none() || k[[i, j]].abs() > best) {
                best = k[[i, j]].abs();
                at = Some((i, j));
            }
        }
    }
    (best, at)
}

/// Gradient of the orthogonality penalty with respect to the entries of `K`.
pub(crate) fn omega_orth_grad<T: Scalar>(k: ArrayView2<'_, T>, variant: OrthVariant) -> Array2<T> {
    let m = k.nrows();
    match variant {
        OrthVariant::So => minus_identity(k) * T::lit(2.0),
        OrthVariant::Srip => {
            let (sigma, u, v) = spectral_norm_sym(minus_identity(k).view());
            let mut g = Array2::zeros((m, m));
            if sigma > T::zero() {
                for i in 0..m {
                    for j in 0..m {
                        g[[i, j]] = v[i] * u[j];
                    }
                }
            }
            g
        }
        OrthVariant::Mc => {
            let mut g = Array2::zeros((m, m));
            if let (_, Some((i, j))) = mutual_coherence(k) {
                g[[i, j]] = k[[i, j]].signum();
            }
            g
        }
    }
}

/// `(1/b) sum_i sum_j |beta_ij|`.
pub fn omega_l1<T: Scalar>(beta: &GatingWeights<T>) -> T {
    let b = beta.rows();
    if b == 0 {
        return T::zero();
    }
    beta.view().iter().map(|v| v.abs()).sum::<T>() / T::from_usize_lossy(b)
}

/// Individual regularizer values for a batch.
pub fn omega_parts<T: Scalar>(
    x: ArrayView2<'_, T>,
    beta: &GatingWeights<T>,
    layer: &GduLayer<T>,
    variant: OrthVariant,
) -> Result<OmegaParts<T>> {
    Ok(OmegaParts {
        ols: omega_ols(x, beta, layer)?,
        orth: omega_orth(layer.gram_bases().view(), variant)?,
        l1: omega_l1(beta),
    })
}

/// Weighted domain regularizer selected by the layer's gating mode.
pub fn omega_total<T: Scalar>(
    x: ArrayView2<'_, T>,
    beta: &GatingWeights<T>,
    layer: &GduLayer<T>,
    cfg: &RegConfig<T>,
) -> Result<T> {
    cfg.validate()?;
    let (w_ols, w_l1, w_orth) = cfg.weights_for(layer.mode());
    let mut total = T::zero();
    if w_ols != T::zero() {
        total += w_ols * omega_ols(x, beta, layer)?;
    }
    if w_l1 != T::zero() {
        check_beta(x.nrows(), beta.view(), layer.num_bases())?;
        total += w_l1 * omega_l1(beta);
    }
    if w_orth != T::zero() {
        total += w_orth * omega_orth(layer.gram_bases().view(), cfg.orth_variant)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelConfig;
    use crate::layer::{Activation, DomainBasis, LearningMachine};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn layer(mode: GatingMode, centers: &[f64]) -> GduLayer<f64> {
        let bases = centers
            .iter()
            .map(|&c| DomainBasis::new(array![[c]]).unwrap())
            .collect();
        let machines = centers
            .iter()
            .map(|_| {
                LearningMachine::new(array![[1.0, 0.0]], array![0.0, 0.0], Activation::Identity)
                    .unwrap()
            })
            .collect();
        GduLayer::new(bases, machines, KernelConfig::new(1.0).unwrap(), mode, 2.0).unwrap()
    }

    #[test]
    fn ols_with_zero_gates_is_one() {
        let l = layer(GatingMode::Projection, &[0.0, 2.0]);
        let x = array![[0.3], [1.1], [-4.0]];
        let beta = GatingWeights::new(Array2::zeros((3, 2)));
        assert_relative_eq!(
            omega_ols(x.view(), &beta, &l).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ols_exact_reconstruction_is_zero() {
        let l = layer(GatingMode::Projection, &[0.5]);
        let beta = GatingWeights::new(array![[1.0]]);
        assert_eq!(omega_ols(array![[0.5]].view(), &beta, &l).unwrap(), 0.0);
    }

    #[test]
    fn ols_matches_mmd_example() {
        let l = layer(GatingMode::Projection, &[2.0]);
        let beta = GatingWeights::new(array![[1.0]]);
        let v = omega_ols(array![[0.0]].view(), &beta, &l).unwrap();
        assert_relative_eq!(v, 2.0 - 2.0 * (-2.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn ols_shape_mismatch() {
        let l = layer(GatingMode::Projection, &[2.0]);
        let beta = GatingWeights::new(array![[1.0], [1.0]]);
        assert!(omega_ols(array![[0.0]].view(), &beta, &l).is_err());
    }

    #[test]
    fn gram_examples() {
        let l = layer(GatingMode::Cs, &[0.0, 2.0]);
        let k = gram_bases(&l);
        let off = (-2.0_f64).exp();
        assert_relative_eq!(k[[0, 1]], off, epsilon = 1e-15);
        assert_eq!(k[[0, 1]], k[[1, 0]]);
        assert_eq!(k[[0, 0]], 1.0);
        let same = gram_bases(&layer(GatingMode::Cs, &[1.0, 1.0, 1.0]));
        assert!(same.iter().all(|&v| v == same[[0, 0]]));
    }

    #[test]
    fn orth_examples() {
        let eye = Array2::<f64>::eye(3);
        for v in [OrthVariant::So, OrthVariant::Srip, OrthVariant::Mc] {
            assert_eq!(omega_orth(eye.view(), v).unwrap(), 0.0);
        }
        let k = array![[1.0, 0.5], [0.5, 1.0]];
        assert_relative_eq!(
            omega_orth(k.view(), OrthVariant::So).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            omega_orth(k.view(), OrthVariant::Srip).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            omega_orth(k.view(), OrthVariant::Mc).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let rect = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            omega_orth(rect.view(), OrthVariant::So),
            Err(GduError::NonSquare { .. })
        ));
    }

    #[test]
    fn srip_handles_opposite_eigenvalues() {
        // K - I has eigenvalues +-0.5; plain power iteration on A would oscillate
        let k = array![[1.0, 0.5], [0.5, 1.0]];
        let a = minus_identity(k.view());
        let (s, u, v) = spectral_norm_sym(a.view());
        assert_relative_eq!(s, 0.5, epsilon = 1e-12);
        let au = a.dot(&u);
        for i in 0..2 {
            assert_relative_eq!(au[i], s * v[i], epsilon = 1e-12);
        }
        let zero = Array2::<f64>::zeros((3, 3));
        assert_eq!(spectral_norm_sym(zero.view()).0, 0.0);
    }

    #[test]
    fn l1_examples() {
        let l = layer(GatingMode::Mmd, &[0.0, 1.0, 3.0]);
        let x = array![[0.1], [2.0]];
        let beta = l.gate_rows(x.view()).unwrap();
        assert_relative_eq!(omega_l1(&beta), 1.0, epsilon = 1e-15);
        assert_eq!(
            omega_l1(&GatingWeights::new(Array2::<f64>::zeros((4, 3)))),
            0.0
        );
        assert_eq!(omega_l1(&GatingWeights::new(array![[0.5, -0.25]])), 0.75);
    }

    #[test]
    fn total_selects_terms_by_mode() {
        let x = array![[0.0]];
        let geo = layer(GatingMode::Mmd, &[0.0, 2.0]);
        let beta = geo.gate_rows(x.view()).unwrap();
        assert_eq!(
            omega_total(x.view(), &beta, &geo, &RegConfig::none()).unwrap(),
            0.0
        );
        let cfg = RegConfig {
            lambda_l1: 1.0,
            ..RegConfig::none()
        };
        assert_relative_eq!(
            omega_total(x.view(), &beta, &geo, &cfg).unwrap(),
            omega_l1(&beta),
            epsilon = 1e-15
        );

        let proj = layer(GatingMode::Projection, &[2.0]);
        let pb = GatingWeights::new(array![[1.0]]);
        let cfg = RegConfig {
            lambda_ols: 1e-3,
            lambda_orth: 1e-3,
            lambda_l1: 5.0,
            orth_variant: OrthVariant::Srip,
        };
        let ols = 2.0 - 2.0 * (-2.0_f64).exp();
        let srip = omega_orth(proj.gram_bases().view(), OrthVariant::Srip).unwrap();
        assert_relative_eq!(
            omega_total(x.view(), &pb, &proj, &cfg).unwrap(),
            1e-3 * (ols + srip),
            epsilon = 1e-15
        );
        let bad = RegConfig {
            lambda_ols: -1.0,
            ..RegConfig::none()
        };
        assert!(omega_total(x.view(), &pb, &proj, &bad).is_err());
    }

    #[test]
    fn so_positive_off_identity() {
        for eps in [1e-6, -1e-3, 0.2] {
            let mut k = Array2::<f64>::eye(3);
            k[[0, 2]] += eps;
            k[[2, 0]] += eps;
            assert!(omega_orth(k.view(), OrthVariant::So).unwrap() > 0.0);
        }
    }
}
