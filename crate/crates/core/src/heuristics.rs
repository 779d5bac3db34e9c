//! Choosing the number of domain bases: k-means on extracted features scored by
//! the Davies-Bouldin index.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GduError, Result};
use crate::kernel::sq_dist;
use crate::scalar::Scalar;

pub const KMEANS_MAX_ITERS: usize = 300;
/// Seedings per [`kmeans`] call; the lowest-inertia solution is kept.
pub const KMEANS_N_INIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<T> {
    pub assignments: Vec<usize>,
    pub centroids: Array2<T>,
    pub inertia: T,
    /// Inertia after every Lloyd iteration, starting with the seeding assignment.
    pub inertia_history: Vec<T>,
}

impl<T: Scalar> ClusteringResult<T> {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn nearest<T: Scalar>(x: ArrayView1<'_, T>, centroids: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids<T: Scalar>(x: ArrayView2<'_, T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, x.row(first)).to_f64_lossy())
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)).to_f64_lossy());
        }
    }
    centroids
}

/// Lloyd's algorithm from [`KMEANS_N_INIT`] k-means++ seedings, keeping the
/// lowest final inertia (earliest on ties); deterministic in `seed`.
pub fn kmeans<T: Scalar>(x: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<ClusteringResult<T>> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(GduError::TooFewPoints { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = lloyd(x, k, &mut rng);
    for _ in 1..KMEANS_N_INIT {
        let run = lloyd(x, k, &mut rng);
        if run.inertia < best.inertia {
            best = run;
        }
    }
    Ok(best)
}

fn lloyd<T: Scalar>(x: ArrayView2<'_, T>, k: usize, rng: &mut ChaCha8Rng) -> ClusteringResult<T> {
    let n = x.nrows();
    let mut centroids = seed_centroids(x, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut history: Vec<T> = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut inertia = T::zero();
        for (i, r) in x.rows().into_iter().enumerate() {
            let (c, d) = nearest(r, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            inertia += d;
        }
        if let Some(&prev) = history.last() {
            debug_assert!(
                inertia <= prev + prev.abs() * T::lit(1e-12),
                "k-means inertia increased: {prev} -> {inertia}"
            );
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = Array2::<T>::zeros((k, x.ncols()));
        let mut counts = vec![0usize; k];
        for (r, &a) in x.rows().into_iter().zip(&assignments) {
            let mut s = sums.row_mut(a);
            s += &r;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / T::from_usize_lossy(counts[c]);
                centroids.row_mut(c).assign(&mean);
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed from the point farthest from its own centroid
                let far = (0..n)
                    .map(|i| (i, sq_dist(x.row(i), centroids.row(assignments[i]))))
                    .fold(
                        (0, T::neg_infinity()),
                        |acc, v| if v.1 > acc.1 { v } else { acc },
                    );
                if far.1 > T::zero() {
                    centroids.row_mut(c).assign(&x.row(far.0));
                }
            }
        }
    }
    let inertia = *history.last().expect("at least one iteration");
    ClusteringResult {
        assignments,
        centroids,
        inertia,
        inertia_history: history,
    }
}

/// Davies-Bouldin index with mean intra-cluster distance to the centroid.
/// Pairs of coincident centroids contribute zero.
pub fn davies_bouldin<T: Scalar>(x: ArrayView2<'_, T>, result: &ClusteringResult<T>) -> Result<T> {
    let k = result.k();
    if k < 2 {
        return Err(GduError::InvalidConfig(format!(
            "Davies-Bouldin needs k >= 2, got {k}"
        )));
    }
    if result.assignments.len() != x.nrows() {
        return Err(GduError::DimensionMismatch {
            left: result.assignments.len(),
            right: x.nrows(),
        });
    }
    let sizes = result.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(GduError::EmptyCluster(c));
    }
    let mut spread = vec![T::zero(); k];
    for (r, &a) in x.rows().into_iter().zip(&result.assignments) {
        spread[a] += sq_dist(r, result.centroids.row(a)).sqrt();
    }
    for (s, &size) in spread.iter_mut().zip(&sizes) {
        *s /= T::from_usize_lossy(size);
    }
    let mut total = T::zero();
    for i in 0..k {
        let mut worst = T::zero();
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = sq_dist(result.centroids.row(i), result.centroids.row(j)).sqrt();
            if d > T::zero() {
                worst = worst.max((spread[i] + spread[j]) / d);
            }
        }
        total += worst;
    }
    Ok(total / T::from_usize_lossy(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbScore {
    pub k: usize,
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectMResult {
    pub chosen: usize,
    pub table: Vec<DbScore>,
}

impl SelectMResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_db,std_db\n");
        for r in &self.table {
            out.push_str(&format!("{},{},{}\n", r.k, r.mean, r.std));
        }
        out
    }
}

/// Runs k-means `runs` times for every `k` in `k_min..=k_max` (seeds `seed0..seed0+runs`)
/// and picks the `k` with the lowest mean Davies-Bouldin score, preferring smaller `k` on ties.
pub fn select_m<T: Scalar>(
    x: ArrayView2<'_, T>,
    k_min: usize,
    k_max: usize,
    runs: usize,
    seed0: u64,
) -> Result<SelectMResult> {
    if k_min < 2 || k_min > k_max || k_max > x.nrows() {
        return Err(GduError::InvalidConfig(format!(
            "invalid k range [{k_min}, {k_max}] for {} points",
            x.nrows()
        )));
    }
    if runs == 0 {
        return Err(GduError::InvalidConfig(
            "select_m needs at least one run".into(),
        ));
    }
    let mut table = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let scores = (0..runs as u64)
            .map(|s| {
                let res = kmeans(x, k, seed0.wrapping_add(s))?;
                Ok(davies_bouldin(x, &res)?.to_f64_lossy())
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = scores.iter().sum::<f64>() / runs as f64;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / runs as f64;
        table.push(DbScore {
            k,
            mean,
            std: var.sqrt(),
        });
    }
    let chosen = table
        .iter()
        .fold(None::<&DbScore>, |best, r| match best {
            Some(b) if b.mean <= r.mean => Some(b),
            _ => Some(r),
        })
        .expect("non-empty range")
        .k;
    Ok(SelectMResult { chosen, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[Vec<f64>], per: usize, radius: f64, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, radius).unwrap();
        let e = centers[0].len();
        let mut x = Array2::zeros((centers.len() * per, e));
        for (c, center) in centers.iter().enumerate() {
            for i in 0..per {
                for d in 0..e {
                    x[[c * per + i, d]] = center[d] + noise.sample(&mut rng);
                }
            }
        }
        x
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let x = array![[0.0], [1.0], [5.0], [9.0]];
        let r = kmeans(x.view(), 4, 3).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut a = r.assignments.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [4.0, -1.0]];
        let r = kmeans(x.view(), 1, 0).unwrap();
        assert_relative_eq!(r.centroids[[0, 0]], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.centroids[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_blobs_separated() {
        let x = blobs(&[vec![0.0], vec![10.0]], 20, 0.05, 1);
        let r = kmeans(x.view(), 2, 7).unwrap();
        let first = r.assignments[0];
        assert!(r.assignments[..20].iter().all(|&a| a == first));
        assert!(r.assignments[20..].iter().all(|&a| a != first));
        let mut c: Vec<f64> = r.centroids.column(0).to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.0).abs() < 0.2 && (c[1] - 10.0).abs() < 0.2);
    }

    #[test]
    fn too_many_clusters_is_error() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            kmeans(x.view(), 3, 0),
            Err(GduError::TooFewPoints { k: 3, n: 2 })
        ));
    }

    #[test]
    fn davies_bouldin_examples() {
        let x = array![[0.0], [3.0]];
        let r = kmeans(x.view(), 2, 0).unwrap();
        assert_eq!(davies_bouldin(x.view(), &r).unwrap(), 0.0);

        // clusters {-1, 1} and {3, 5}: s = 1 each, centroids 0 and 4
        let x = array![[-1.0], [1.0], [3.0], [5.0]];
        let r = ClusteringResult {
            assignments: vec![0, 0, 1, 1],
            centroids: array![[0.0], [4.0]],
            inertia: 4.0,
            inertia_history: vec![4.0],
        };
        assert_relative_eq!(davies_bouldin(x.view(), &r).unwrap(), 0.5, epsilon = 1e-15);

        let single = ClusteringResult {
            assignments: vec![0, 0, 0, 0],
            centroids: array![[1.0]],
            inertia: 0.0,
            inertia_history: vec![],
        };
        assert!(davies_bouldin(x.view(), &single).is_err());
        let empty = ClusteringResult {
            assignments: vec![0, 0, 0, 0],
            centroids: array![[1.0], [2.0]],
            inertia: 0.0,
            inertia_history: vec![],
        };
        assert!(matches!(
            davies_bouldin(x.view(), &empty),
            Err(GduError::EmptyCluster(1))
        ));
    }

    #[test]
    fn select_m_three_gaussians() {
        let x = blobs(
            &[vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]],
            30,
            0.5,
            3,
        );
        let r = select_m(x.view(), 2, 8, 5, 0).unwrap();
        assert_eq!(r.chosen, 3);
        assert_eq!(r.table.len(), 7);
        assert_eq!(select_m(x.view(), 4, 4, 2, 0).unwrap().chosen, 4);
        assert_eq!(r, select_m(x.view(), 2, 8, 5, 0).unwrap());
        assert!(r.to_csv().starts_with("k,mean_db,std_db\n2,"));
        assert!(select_m(x.view(), 1, 3, 1, 0).is_err());
        assert!(select_m(x.view(), 5, 3, 1, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inertia_non_increasing(seed in 0u64..1000, k in 1usize..6) {
            let x = blobs(&[vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 4.0]], 10, 1.0, seed);
            let r = kmeans(x.view(), k, seed).unwrap();
            for w in r.inertia_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
            prop_assert!(r.assignments.iter().all(|&a| a < k));
        }

        #[test]
        fn davies_bouldin_translation_invariant(seed in 0u64..1000, shift in -50.0f64..50.0) {
            let x = blobs(&[vec![0.0, 0.0], vec![6.0, 1.0]], 8, 1.0, seed);
            let r = kmeans(x.view(), 2, seed).unwrap();
            let db = davies_bouldin(x.view(), &r).unwrap();
            let moved = &x + shift;
            let rm = ClusteringResult {
                centroids: &r.centroids + shift,
                ..r.clone()
            };
            let dbm = davies_bouldin(moved.view(), &rm).unwrap();
            prop_assert!((db - dbm).abs() < 1e-9 * (1.0 + db));
            prop_assert!(db >= 0.0);
        }
    }
}
