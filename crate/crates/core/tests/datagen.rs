use gdu_core::datagen::{make_benchmark, BenchmarkParams, DomainRole};
use gdu_core::{gram, median_heuristic, Dataset, KernelConfig};
use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PERMUTATIONS: usize = 200;

/// Biased MMD^2 of the first `n` rows against the rest, from a pooled Gram matrix.
fn mmd_from_gram(k: &Array2<f64>, idx: &[usize], n: usize) -> f64 {
    let (a, b) = idx.split_at(n);
    let mean = |p: &[usize], q: &[usize]| {
        let mut s = 0.0;
        for &i in p {
            for &j in q {
                s += k[[i, j]];
            }
        }
        s / (p.len() * q.len()) as f64
    };
    mean(a, a) - 2.0 * mean(a, b) + mean(b, b)
}

/// Observed MMD^2 and the 95th percentile of its permutation null.
fn permutation_test(a: &Array2<f64>, b: &Array2<f64>, seed: u64) -> (f64, f64) {
    let pooled = concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
    let sigma = median_heuristic(pooled.view()).unwrap();
    let k = gram(pooled.view(), pooled.view(), &KernelConfig::new(sigma).unwrap()).unwrap();
    let mut idx: Vec<usize> = (0..pooled.nrows()).collect();
    let observed = mmd_from_gram(&k, &idx, a.nrows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut null: Vec<f64> = (0..PERMUTATIONS)
        .map(|_| {
            idx.shuffle(&mut rng);
            mmd_from_gram(&k, &idx, a.nrows())
        })
        .collect();
    null.sort_by(f64::total_cmp);
    (observed, null[(0.95 * PERMUTATIONS as f64) as usize])
}

fn with_tag(d: &Dataset<f64>, tag: usize) -> Array2<f64> {
    let idx: Vec<usize> = (0..d.len()).filter(|&i| d.tags[i] == tag).collect();
    d.inputs.select(Axis(0), &idx)
}

#[test]
fn same_component_samples_match_across_domains() {
    let bench = make_benchmark(&BenchmarkParams::default()).unwrap();
    let splits = bench.sample().unwrap();
    let sources: Vec<usize> = bench.role(DomainRole::Source).map(|d| d.id).collect();
    let (mut tests, mut rejected) = (0, 0);
    for tag in 0..bench.elementary.k() {
        let pairs: Vec<Array2<f64>> = sources
            .iter()
            .map(|&id| with_tag(&splits.train.domain(id), tag))
            .chain(std::iter::once(with_tag(&splits.target, tag)))
            .filter(|x| x.nrows() >= 20)
            .collect();
        for (i, a) in pairs.iter().enumerate() {
            for b in &pairs[i + 1..] {
                let (obs, q95) = permutation_test(a, b, (tag * 100 + i) as u64);
                tests += 1;
                rejected += usize::from(obs > q95);
            }
        }
    }
    assert!(tests >= 8, "only {tests} comparable pairs");
    // each test has a 5% false-rejection rate under the null
    assert!(rejected * 5 <= tests, "{rejected} of {tests} same-component pairs rejected");
}

#[test]
fn target_differs_from_every_source() {
    let bench = make_benchmark(&BenchmarkParams::default()).unwrap();
    let splits = bench.sample().unwrap();
    for src in bench.role(DomainRole::Source) {
        let a = splits.train.domain(src.id).inputs;
        let (obs, q95) = permutation_test(&a, &splits.target.inputs, src.id as u64);
        assert!(obs > q95, "source {}: mmd {obs} below null 95th percentile {q95}", src.id);
    }
}

#[test]
fn benchmark_is_a_function_of_its_seed() {
    let p = BenchmarkParams::default();
    let a = make_benchmark(&p).unwrap().sample().unwrap();
    let b = make_benchmark(&p).unwrap().sample().unwrap();
    assert_eq!(a.train.inputs, b.train.inputs);
    assert_eq!(a.target.labels, b.target.labels);
    let c = make_benchmark(&BenchmarkParams { seed: 1, ..p }).unwrap().sample().unwrap();
    assert_ne!(a.train.inputs, c.train.inputs);
}

#[test]
fn split_sizes_follow_params() {
    let p = BenchmarkParams::default();
    let s = make_benchmark(&p).unwrap().sample().unwrap();
    assert_eq!(s.train.len(), p.sources * p.n_source);
    assert_eq!(s.validation.len(), p.sources * p.n_validation);
    assert_eq!(s.target.len(), p.n_target);
    assert_eq!(s.train.domain_ids().len(), p.sources);
    assert!(s.train.tags.iter().all(|&t| t < p.k));
    assert!(s.train.labels.iter().all(|&y| y < p.classes));
}
