//! Gaussian kernel, Gram matrices and the median bandwidth heuristic.
//!
//! The kernel is parameterized as `k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{GduError, Result};
use crate::scalar::Scalar;

/// Bandwidth of the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<T> {
    sigma: T,
}

impl<T: Scalar> KernelConfig<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(GduError::InvalidConfig(format!(
                "kernel bandwidth must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `1 / (2 sigma^2)`, the factor multiplying the squared distance.
    #[inline]
    pub fn gamma(&self) -> T {
        T::one() / (T::lit(2.0) * self.sigma * self.sigma)
    }

    #[inline]
    pub(crate) fn eval_sq_dist(&self, d2: T) -> T {
        (-d2 * self.gamma()).exp()
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.sigma != other.sigma {
            return Err(GduError::KernelMismatch {
                left: self.sigma.to_f64_lossy(),
                right: other.sigma.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sq_dist<T: Scalar>(x: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> T {
    x.iter()
        .zip(y.iter())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
}

pub fn gaussian_kernel<T: Scalar>(
    x: ArrayView1<'_, T>,
    y: ArrayView1<'_, T>,
    cfg: &KernelConfig<T>,
) -> Result<T> {
    if x.len() != y.len() {
        return Err(GduError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(cfg.eval_sq_dist(sq_dist(x, y)))
}

/// `G[i][j] = k(x_i, y_j)`.
pub fn gram<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView2<'_, T>,
    cfg: &KernelConfig<T>,
) -> Result<Array2<T>> {
    if x.ncols() != y.ncols() {
        return Err(GduError::DimensionMismatch {
            left: x.ncols(),
            right: y.ncols(),
        });
    }
    let mut g = Array2::zeros((x.nrows(), y.nrows()));
    for (i, xi) in x.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            g[[i, j]] = cfg.eval_sq_dist(sq_dist(xi, yj));
        }
    }
    Ok(g)
}

/// `sigma = sqrt(median{ ||x_i - x_j||^2 : i < j })`.
///
/// Pairs with `i == j` are excluded. For an even number of pairs the median is
/// the mean of the two central values.
pub fn median_heuristic<T: Scalar>(x: ArrayView2<'_, T>) -> Result<T> {
    let n = x.nrows();
    if n < 2 {
        return Err(GduError::Empty("median heuristic needs at least two rows"));
    }
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = x.row(i);
        for j in (i + 1)..n {
            d2.push(sq_dist(xi, x.row(j)));
        }
    }
    if d2.iter().any(|v| !v.is_finite()) {
        return Err(GduError::InvalidConfig("non-finite feature values".into()));
    }
    let med = median_in_place(&mut d2);
    if med <= T::zero() {
        // a zero median with non-identical rows still yields no usable bandwidth
        return Err(GduError::DegenerateData);
    }
    Ok(med.sqrt())
}

pub(crate) fn median_in_place<T: Scalar>(values: &mut [T]) -> T {
    let len = values.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("finite values");
    let mid = len / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, cmp);
    let upper_mid = *upper_mid;
    if len % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(T::neg_infinity(), T::max);
        (lower_mid + upper_mid) / T::lit(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn cfg(s: f64) -> KernelConfig<f64> {
        KernelConfig::new(s).unwrap()
    }

    #[test]
    fn rejects_non_positive_bandwidth() {
        assert!(KernelConfig::new(0.0_f64).is_err());
        assert!(KernelConfig::new(-1.0_f64).is_err());
        assert!(KernelConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn self_similarity_is_one() {
        let x = array![0.3, -1.2, 4.0];
        assert_eq!(gaussian_kernel(x.view(), x.view(), &cfg(0.7)).unwrap(), 1.0);
    }

    #[test]
    fn distance_two_sigma_squared_gives_exp_minus_one() {
        // ||x - y||^2 = 2 sigma^2 with sigma = 1.5
        let s = 1.5;
        let d = (2.0_f64 * s * s).sqrt();
        let x = array![0.0, 0.0];
        let y = array![d, 0.0];
        let k = gaussian_kernel(x.view(), y.view(), &cfg(s)).unwrap();
        assert_relative_eq!(k, (-1.0_f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(k, 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn dimension_mismatch_names_both_sides() {
        let x = array![0.0, 1.0];
        let y = array![0.0, 1.0, 2.0];
        let err = gaussian_kernel(x.view(), y.view(), &cfg(1.0)).unwrap_err();
        assert!(matches!(
            err,
            GduError::DimensionMismatch { left: 2, right: 3 }
        ));
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'));
    }

    #[test]
    fn gram_two_points() {
        let x = array![[0.0], [1.0]];
        let g = gram(x.view(), x.view(), &cfg(1.0)).unwrap();
        let off = (-0.5_f64).exp();
        assert_eq!(g, array![[1.0, off], [off, 1.0]]);
    }

    #[test]
    fn gram_column_mismatch() {
        let x = Array2::<f64>::zeros((2, 2));
        let y = Array2::<f64>::zeros((2, 3));
        assert!(gram(x.view(), y.view(), &cfg(1.0)).is_err());
    }

    #[test]
    fn median_of_three_points() {
        // squared distances {1, 4, 9}
        let x = array![[0.0], [1.0], [3.0]];
        assert_eq!(median_heuristic(x.view()).unwrap(), 2.0);
    }

    #[test]
    fn median_even_count_averages_central_values() {
        // four points on a line: squared distances {1,4,9,1,4,1} -> sorted 1,1,1,4,4,9 -> (1+4)/2
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        assert_relative_eq!(median_heuristic(x.view()).unwrap(), 2.5_f64.sqrt());
    }

    #[test]
    fn median_single_pair_is_distance() {
        let x = array![[1.0, 2.0], [4.0, 6.0]];
        assert_relative_eq!(median_heuristic(x.view()).unwrap(), 5.0);
    }

    #[test]
    fn median_rejects_identical_rows() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        assert!(matches!(
            median_heuristic(x.view()),
            Err(GduError::DegenerateData)
        ));
        let one = array![[1.0, 2.0]];
        assert!(median_heuristic(one.view()).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let x = array![[0.0_f32], [1.0], [3.0]];
        assert_eq!(median_heuristic(x.view()).unwrap(), 2.0_f32);
        let k = KernelConfig::new(1.0_f32).unwrap();
        let g = gram(x.view(), x.view(), &k).unwrap();
        assert_eq!(g[[1, 1]], 1.0_f32);
    }

    fn matrix(n: usize, e: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-5.0..5.0_f64, n * e)
            .prop_map(move |v| Array2::from_shape_vec((n, e), v).unwrap())
    }

    proptest! {
        #[test]
        fn kernel_bounded_and_symmetric(x in matrix(2, 4), s in 0.1..5.0_f64) {
            let c = cfg(s);
            let kxy = gaussian_kernel(x.row(0), x.row(1), &c).unwrap();
            let kyx = gaussian_kernel(x.row(1), x.row(0), &c).unwrap();
            prop_assert_eq!(kxy, kyx);
            prop_assert!(kxy <= 1.0 && kxy >= 0.0);
        }

        #[test]
        fn gram_transpose(x in matrix(3, 2), y in matrix(4, 2)) {
            let c = cfg(1.3);
            let a = gram(x.view(), y.view(), &c).unwrap();
            let b = gram(y.view(), x.view(), &c).unwrap();
            prop_assert_eq!(a, b.t().to_owned());
        }

        #[test]
        fn gram_is_psd(n in 2usize..50, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-3.0..3.0));
            let g = gram(x.view(), x.view(), &cfg(1.0)).unwrap();
            for i in 0..n {
                prop_assert_eq!(g[[i, i]], 1.0);
            }
            let eig = nalgebra::DMatrix::from_fn(n, n, |i, j| g[[i, j]]).symmetric_eigen();
            for v in eig.eigenvalues.iter() {
                prop_assert!(*v >= -1e-10);
            }
        }

        #[test]
        fn median_invariances(x in matrix(6, 3), shift in proptest::collection::vec(-10.0..10.0_f64, 3), rot in 0usize..6) {
            let base = median_heuristic(x.view()).unwrap();
            let mut shifted = x.clone();
            for mut row in shifted.rows_mut() {
                for (v, s) in row.iter_mut().zip(&shift) {
                    *v += s;
                }
            }
            let mut permuted = x.clone();
            for i in 0..6 {
                permuted.row_mut(i).assign(&x.row((i + rot) % 6));
            }
            prop_assert_eq!(median_heuristic(permuted.view()).unwrap(), base);
            prop_assert!((median_heuristic(shifted.view()).unwrap() - base).abs() < 1e-9 * base.max(1.0));
        }
    }
}
