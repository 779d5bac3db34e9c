//! Empirical kernel mean embeddings and their RKHS algebra.
//!
//! An [`EmpiricalKme`] is `mu = (1/n) sum_i k(p_i, .)` over a set of points. A
//! single observation is the `n = 1` case, so samples, batches and domain bases
//! all go through the same code.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{GduError, Result};
use crate::kernel::{sq_dist, KernelConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalKme<T> {
    points: Array2<T>,
    cfg: KernelConfig<T>,
}

impl<T: Scalar> EmpiricalKme<T> {
    pub fn new(points: Array2<T>, cfg: KernelConfig<T>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(GduError::Empty(
                "kernel mean embedding needs at least one point",
            ));
        }
        Ok(Self { points, cfg })
    }

    /// Embedding `phi(x)` of a single observation.
    pub fn single(x: ArrayView1<'_, T>, cfg: KernelConfig<T>) -> Self {
        Self {
            points: x.to_owned().insert_axis(Axis(0)),
            cfg,
        }
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn kernel(&self) -> &KernelConfig<T> {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        self.cfg.ensure_same(&other.cfg)?;
        if self.dim() != other.dim() {
            return Err(GduError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

/// `(1/(n_a n_b)) sum_i sum_j k(a_i, b_j)` without any shape checks.
pub(crate) fn mean_kernel<T: Scalar>(
    a: ArrayView2<'_, T>,
    b: ArrayView2<'_, T>,
    cfg: &KernelConfig<T>,
) -> T {
    let mut acc = T::zero();
    for ai in a.rows() {
        for bj in b.rows() {
            acc += cfg.eval_sq_dist(sq_dist(ai, bj));
        }
    }
    acc / T::from_usize_lossy(a.nrows() * b.nrows())
}

/// `<mu_A, mu_B>_H`.
pub fn kme_inner<T: Scalar>(a: &EmpiricalKme<T>, b: &EmpiricalKme<T>) -> Result<T> {
    a.compatible(b)?;
    Ok(mean_kernel(a.points(), b.points(), &a.cfg))
}

/// `||mu_A||_H^2`.
pub fn kme_norm_sq<T: Scalar>(a: &EmpiricalKme<T>) -> Result<T> {
    kme_inner(a, a)
}

/// Maps a squared norm that went slightly negative through cancellation to zero.
pub(crate) fn clamp_sq_norm<T: Scalar>(v: T) -> Result<T> {
    if v >= T::zero() {
        Ok(v)
    } else if v >= -T::sq_norm_tolerance() {
        Ok(T::zero())
    } else {
        Err(GduError::NegativeSquaredNorm(v.to_f64_lossy()))
    }
}

/// `||mu_A - mu_B||_H^2 = <A,A> - 2<A,B> + <B,B>`.
pub fn mmd_sq<T: Scalar>(a: &EmpiricalKme<T>, b: &EmpiricalKme<T>) -> Result<T> {
    a.compatible(b)?;
    let aa = mean_kernel(a.points(), a.points(), &a.cfg);
    let bb = mean_kernel(b.points(), b.points(), &a.cfg);
    let ab = mean_kernel(a.points(), b.points(), &a.cfg);
    clamp_sq_norm(aa - ab - ab + bb)
}

/// `<mu_A, mu_B> / (||mu_A|| ||mu_B||)`.
pub fn rkhs_cosine<T: Scalar>(a: &EmpiricalKme<T>, b: &EmpiricalKme<T>) -> Result<T> {
    a.compatible(b)?;
    let aa = mean_kernel(a.points(), a.points(), &a.cfg);
    let bb = mean_kernel(b.points(), b.points(), &a.cfg);
    let ab = mean_kernel(a.points(), b.points(), &a.cfg);
    Ok(ab / (aa.sqrt() * bb.sqrt()))
}
