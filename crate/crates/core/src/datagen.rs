//! Synthetic multi-domain benchmarks built from invariant elementary distributions.
//!
//! Each elementary component `j` is a class-conditional Gaussian: the class means
//! sit at `center_j +- class_offset * u_j`, where the centers are `separation`
//! apart and the discriminative direction `u_j` is rotated by `j * pi / K` in the
//! first two input coordinates. A domain is a mixture of the components with
//! weights `alpha`. Sources draw `alpha` from a symmetric Dirichlet; the target
//! puts its mass on the components the sources under-represent.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{GduError, Result};
use crate::kv::parse_kv;
use crate::scalar::Scalar;
use crate::training::data::{Dataset, DatasetSplits};

/// Minimum L1 distance between the target mixing weights and every source.
pub const MIN_TARGET_L1: f64 = 0.1;

const SIMPLEX_TOL: f64 = 1e-12;

/// One elementary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryComponent {
    /// `C x e` class means.
    pub class_means: Array2<f64>,
    /// Per-coordinate standard deviation shared by all classes.
    pub std: Array1<f64>,
    /// Label distribution over the `C` classes.
    pub label_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementarySpec {
    pub components: Vec<ElementaryComponent>,
}

fn check_simplex(what: &str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(GduError::InvalidConfig(format!(
            "{what} is not on the simplex: {p:?}"
        )));
    }
    Ok(())
}

impl ElementarySpec {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn num_classes(&self) -> usize {
        self.components[0].class_means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components[0].class_means.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .components
            .first()
            .ok_or(GduError::Empty("elementary spec needs a component"))?;
        let (c, e) = first.class_means.dim();
        for (j, comp) in self.components.iter().enumerate() {
            if comp.class_means.dim() != (c, e)
                || comp.std.len() != e
                || comp.label_probs.len() != c
            {
                return Err(GduError::ShapeMismatch {
                    what: "elementary component",
                    expected: format!("{c} classes in {e} dims"),
                    found: format!("component {j}"),
                });
            }
            if comp.std.iter().any(|&s| !(s > 0.0)) {
                return Err(GduError::InvalidConfig(format!(
                    "component {j} has non-positive std"
                )));
            }
            check_simplex("label distribution", &comp.label_probs)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainRole {
    Source,
    Validation,
    Target,
}

impl fmt::Display for DomainRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainRole::Source => "source",
            DomainRole::Validation => "validation",
            DomainRole::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    /// Domain id written to the dataset; a validation split shares its source's id.
    pub id: usize,
    pub alpha: Vec<f64>,
    pub n_samples: usize,
    pub role: DomainRole,
}

impl DomainSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.alpha.len() != k {
            return Err(GduError::ShapeMismatch {
                what: "mixing weights",
                expected: k.to_string(),
                found: self.alpha.len().to_string(),
            });
        }
        check_simplex("mixing weights", &self.alpha)?;
        if self.n_samples == 0 {
            return Err(GduError::InvalidConfig(
                "domain needs at least one sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    pub elementary: ElementarySpec,
    pub domains: Vec<DomainSpec>,
    pub seed: u64,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

impl SyntheticBenchmark {
    pub fn validate(&self) -> Result<()> {
        self.elementary.validate()?;
        let k = self.elementary.k();
        for d in &self.domains {
            d.validate(k)?;
        }
        let sources: Vec<&DomainSpec> = self.role(DomainRole::Source).collect();
        let targets: Vec<&DomainSpec> = self.role(DomainRole::Target).collect();
        if sources.len() < 2 || targets.is_empty() {
            return Err(GduError::InvalidConfig(format!(
                "benchmark needs >= 2 sources and >= 1 target, got {} and {}",
                sources.len(),
                targets.len()
            )));
        }
        if k > 1 {
            for t in &targets {
                for s in &sources {
                    if l1(&t.alpha, &s.alpha) <= MIN_TARGET_L1 {
                        return Err(GduError::InvalidConfig(format!(
                            "target {} is within L1 {MIN_TARGET_L1} of source {}",
                            t.id, s.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn role(&self, role: DomainRole) -> impl Iterator<Item = &DomainSpec> {
        self.domains.iter().filter(move |d| d.role == role)
    }

    /// Samples every domain with seeds derived from the benchmark seed.
    pub fn sample(&self) -> Result<DatasetSplits<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut parts: Vec<(DomainRole, Dataset<f64>)> = Vec::new();
        for d in &self.domains {
            let seed: u64 = rng.random();
            parts.push((d.role, sample_domain(d, &self.elementary, seed)?));
        }
        let pick = |role: DomainRole| -> Result<Dataset<f64>> {
            let sel: Vec<&Dataset<f64>> = parts
                .iter()
                .filter(|(r, _)| *r == role)
                .map(|(_, d)| d)
                .collect();
            Dataset::concat(&sel)
        };
        Ok(DatasetSplits {
            train: pick(DomainRole::Source)?,
            validation: pick(DomainRole::Validation)?,
            target: pick(DomainRole::Target)?,
        })
    }
}

/// Draws `spec.n_samples` rows: component `j ~ alpha`, class `y ~ label_probs_j`,
/// features `x ~ N(mean_{j,y}, diag(std_j^2))`. Tags record `j`.
pub fn sample_domain(spec: &DomainSpec, elem: &ElementarySpec, seed: u64) -> Result<Dataset<f64>> {
    elem.validate()?;
    spec.validate(elem.k())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick_component =
        WeightedIndex::new(&spec.alpha).map_err(|e| GduError::InvalidConfig(e.to_string()))?;
    let pick_label = elem
        .components
        .iter()
        .map(|c| {
            WeightedIndex::new(&c.label_probs).map_err(|e| GduError::InvalidConfig(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let e = elem.dim();
    let n = spec.n_samples;
    let mut inputs = Array2::zeros((n, e));
    let mut labels = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for i in 0..n {
        let j = pick_component.sample(&mut rng);
        let comp = &elem.components[j];
        let y = pick_label[j].sample(&mut rng);
        for d in 0..e {
            let z: f64 = unit.sample(&mut rng);
            inputs[[i, d]] = comp.class_means[[y, d]] + comp.std[d] * z;
        }
        labels.push(y);
        tags.push(j);
    }
    Dataset::new(inputs, labels, vec![spec.id; n], tags)
}

/// Parameters of [`make_benchmark`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkParams {
    /// Number of elementary components `K`.
    pub k: usize,
    /// Number of classes `C`.
    pub classes: usize,
    /// Input dimension.
    pub dim: usize,
    pub sources: usize,
    pub n_source: usize,
    pub n_validation: usize,
    pub n_target: usize,
    /// Distance between component centers, in units of `noise_std`.
    pub separation: f64,
    /// Distance of the extreme class means from the component center, in units of `noise_std`.
    pub class_offset: f64,
    pub noise_std: f64,
    /// Symmetric Dirichlet concentration for source mixing weights.
    pub dirichlet: f64,
    /// Conditional shift knob: component `j` favors class `j mod C` with this extra mass.
    pub label_skew: f64,
    pub seed: u64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            k: 4,
            classes: 2,
            dim: 4,
            sources: 3,
            n_source: 400,
            n_validation: 100,
            n_target: 1000,
            separation: 6.0,
            class_offset: 2.0,
            noise_std: 1.0,
            dirichlet: 1.0,
            label_skew: 0.0,
            seed: 0,
        }
    }
}

impl BenchmarkParams {
    pub const KEYS: [&'static str; 13] = [
        "k",
        "classes",
        "dim",
        "sources",
        "n_source",
        "n_validation",
        "n_target",
        "separation",
        "class_offset",
        "noise_std",
        "dirichlet",
        "label_skew",
        "seed",
    ];

    /// Sets one field from its text form. Returns `Ok(false)` for keys that are not
    /// benchmark parameters.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<V: FromStr>(key: &str, v: &str) -> Result<V> {
            v.parse()
                .map_err(|_| GduError::InvalidConfig(format!("bad value `{v}` for `{key}`")))
        }
        match key {
            "k" => self.k = num(key, value)?,
            "classes" => self.classes = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "sources" => self.sources = num(key, value)?,
            "n_source" => self.n_source = num(key, value)?,
            "n_validation" => self.n_validation = num(key, value)?,
            "n_target" => self.n_target = num(key, value)?,
            "separation" => self.separation = num(key, value)?,
            "class_offset" => self.class_offset = num(key, value)?,
            "noise_std" => self.noise_std = num(key, value)?,
            "dirichlet" => self.dirichlet = num(key, value)?,
            "label_skew" => self.label_skew = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for entry in parse_kv(text)? {
            if !p
                .set(&entry.key, &entry.value)
                .map_err(|e| GduError::parse(entry.line, e.to_string()))?
            {
                return Err(entry.unknown());
            }
        }
        Ok(p)
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let value = match key {
                "k" => self.k.to_string(),
                "classes" => self.classes.to_string(),
                "dim" => self.dim.to_string(),
                "sources" => self.sources.to_string(),
                "n_source" => self.n_source.to_string(),
                "n_validation" => self.n_validation.to_string(),
                "n_target" => self.n_target.to_string(),
                "separation" => self.separation.to_string(),
                "class_offset" => self.class_offset.to_string(),
                "noise_std" => self.noise_std.to_string(),
                "dirichlet" => self.dirichlet.to_string(),
                "label_skew" => self.label_skew.to_string(),
                _ => self.seed.to_string(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.classes < 2 || self.dim < 2 || self.sources < 2 {
            return Err(GduError::InvalidConfig(format!(
                "need k >= 1, classes >= 2, dim >= 2 and sources >= 2 (got k={}, classes={}, dim={}, sources={})",
                self.k, self.classes, self.dim, self.sources
            )));
        }
        if self.n_source == 0 || self.n_validation == 0 || self.n_target == 0 {
            return Err(GduError::InvalidConfig(
                "sample counts must be positive".into(),
            ));
        }
        let positive = [("noise_std", self.noise_std), ("dirichlet", self.dirichlet)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GduError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.separation >= 0.0) || !(self.class_offset >= 0.0) {
            return Err(GduError::InvalidConfig(
                "separation and class_offset must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.label_skew) {
            return Err(GduError::InvalidConfig(format!(
                "label_skew must lie in [0, 1), got {}",
                self.label_skew
            )));
        }
        Ok(())
    }
}

/// Component centers with all pairwise distances equal to `separation` when
/// `dim >= k` (scaled unit vectors), else evenly spaced on a circle with
/// neighbouring distance `separation`.
fn component_centers(k: usize, dim: usize, separation: f64) -> Array2<f64> {
    let mut centers = Array2::zeros((k, dim));
    if k == 1 {
        return centers;
    }
    if dim >= k {
        let scale = separation / 2f64.sqrt();
        for j in 0..k {
            centers[[j, j]] = scale;
        }
    } else {
        let radius = separation / (2.0 * (PI / k as f64).sin());
        for j in 0..k {
            let t = 2.0 * PI * j as f64 / k as f64;
            centers[[j, 0]] = radius * t.cos();
            centers[[j, 1]] = radius * t.sin();
        }
    }
    centers
}

fn elementary_from(p: &BenchmarkParams) -> ElementarySpec {
    let centers = component_centers(p.k, p.dim, p.separation * p.noise_std);
    let c = p.classes;
    let components = (0..p.k)
        .map(|j| {
            let theta = j as f64 * PI / p.k as f64;
            let mut means = Array2::zeros((c, p.dim));
            for y in 0..c {
                let pos = 2.0 * y as f64 / (c - 1) as f64 - 1.0;
                for d in 0..p.dim {
                    means[[y, d]] = centers[[j, d]];
                }
                means[[y, 0]] += p.class_offset * p.noise_std * pos * theta.cos();
                means[[y, 1]] += p.class_offset * p.noise_std * pos * theta.sin();
            }
            let mut label_probs = vec![(1.0 - p.label_skew) / c as f64; c];
            label_probs[j % c] += p.label_skew;
            let total: f64 = label_probs.iter().sum();
            label_probs.iter_mut().for_each(|v| *v /= total);
            ElementaryComponent {
                class_means: means,
                std: Array1::from_elem(p.dim, p.noise_std),
                label_probs,
            }
        })
        .collect();
    ElementarySpec { components }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Target weights concentrated on the components least represented in the sources.
fn target_alpha(sources: &[Vec<f64>]) -> Vec<f64> {
    let k = sources[0].len();
    let mean: Vec<f64> = (0..k)
        .map(|j| sources.iter().map(|a| a[j]).sum::<f64>() / sources.len() as f64)
        .collect();
    let top = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alpha: Vec<f64> = mean.iter().map(|m| (top - m) + 0.05).collect();
    normalize(&mut alpha);
    alpha
}

/// Builds a benchmark with `params.sources` source domains (each with a validation
/// split of the same mixture) and one target domain.
pub fn make_benchmark(params: &BenchmarkParams) -> Result<SyntheticBenchmark> {
    params.validate()?;
    let elementary = elementary_from(params);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (sources, target) = if params.k == 1 {
        (vec![vec![1.0]; params.sources], vec![1.0])
    } else {
        // symmetric Dirichlet via normalized Gamma draws
        let gamma = Gamma::new(params.dirichlet, 1.0)
            .map_err(|e| GduError::InvalidConfig(e.to_string()))?;
        let mut attempt = 0;
        loop {
            let sources: Vec<Vec<f64>> = (0..params.sources)
                .map(|_| {
                    let mut a: Vec<f64> = (0..params.k).map(|_| gamma.sample(&mut rng)).collect();
                    normalize(&mut a);
                    a
                })
                .collect();
            let target = target_alpha(&sources);
            if sources.iter().all(|s| l1(s, &target) > MIN_TARGET_L1) {
                break (sources, target);
            }
            attempt += 1;
            if attempt >= 1000 {
                return Err(GduError::InvalidConfig(
                    "could not draw source mixtures distinct from the target".into(),
                ));
            }
        }
    };
    let mut domains = Vec::new();
    for (id, alpha) in sources.iter().enumerate() {
        domains.push(DomainSpec {
            id,
            alpha: alpha.clone(),
            n_samples: params.n_source,
            role: DomainRole::Source,
        });
    }
    for (id, alpha) in sources.iter().enumerate() {
        domains.push(DomainSpec {
            id,
            alpha: alpha.clone(),
            n_samples: params.n_validation,
            role: DomainRole::Validation,
        });
    }
    domains.push(DomainSpec {
        id: params.sources,
        alpha: target,
        n_samples: params.n_target,
        role: DomainRole::Target,
    });
    let bench = SyntheticBenchmark {
        elementary,
        domains,
        seed: params.seed,
    };
    bench.validate()?;
    Ok(bench)
}

/// Header `domain_id,label,tag,f0..f{e-1}`; the tag column is diagnostic only.
pub fn csv_header(dim: usize) -> String {
    let mut h = String::from("domain_id,label,tag");
    for d in 0..dim {
        let _ = write!(h, ",f{d}");
    }
    h
}

pub fn write_dataset_csv<T: Scalar, W: Write>(data: &Dataset<T>, mut out: W) -> Result<()> {
    writeln!(out, "{}", csv_header(data.dim()))?;
    let mut line = String::new();
    for i in 0..data.len() {
        line.clear();
        let _ = write!(
            line,
            "{},{},{}",
            data.domains[i], data.labels[i], data.tags[i]
        );
        for v in data.inputs.row(i) {
            let _ = write!(line, ",{v}");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_dataset_csv<T: Scalar, R: BufRead>(input: R) -> Result<Dataset<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(GduError::Empty("dataset file"))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 4 || cols[..3] != ["domain_id", "label", "tag"] {
        return Err(GduError::parse(1, format!("unexpected header `{header}`")));
    }
    let dim = cols.len() - 3;
    if header.trim() != csv_header(dim) {
        return Err(GduError::parse(1, format!("unexpected header `{header}`")));
    }
    let (mut values, mut labels, mut domains, mut tags) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 3 {
            return Err(GduError::parse(
                lineno,
                format!("expected {} fields, got {}", dim + 3, fields.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| GduError::parse(lineno, format!("`{s}`: {e}")))
        };
        domains.push(int(fields[0])?);
        labels.push(int(fields[1])?);
        tags.push(int(fields[2])?);
        for f in &fields[3..] {
            let v: T = f
                .parse()
                .map_err(|_| GduError::parse(lineno, format!("bad number `{f}`")))?;
            values.push(v);
        }
    }
    let n = labels.len();
    let inputs = Array2::from_shape_vec((n, dim), values).expect("row lengths checked");
    Dataset::new(inputs, labels, domains, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_domain(alpha: Vec<f64>, n: usize) -> (DomainSpec, ElementarySpec) {
        let p = BenchmarkParams {
            k: alpha.len(),
            ..Default::default()
        };
        let spec = DomainSpec {
            id: 0,
            alpha,
            n_samples: n,
            role: DomainRole::Source,
        };
        (spec, elementary_from(&p))
    }

    #[test]
    fn one_hot_alpha_tags_single_component() {
        let (spec, elem) = one_domain(vec![0.0, 0.0, 1.0, 0.0], 200);
        let d = sample_domain(&spec, &elem, 9).unwrap();
        assert_eq!(d.len(), 200);
        assert!(d.tags.iter().all(|&t| t == 2));
    }

    #[test]
    fn component_frequencies_concentrate() {
        let alpha = vec![0.1, 0.2, 0.3, 0.4];
        let n = 10_000;
        let (spec, elem) = one_domain(alpha.clone(), n);
        let d = sample_domain(&spec, &elem, 5).unwrap();
        for (j, &a) in alpha.iter().enumerate() {
            let freq = d.tags.iter().filter(|&&t| t == j).count() as f64 / n as f64;
            let se = (a * (1.0 - a) / n as f64).sqrt();
            assert!((freq - a).abs() < 3.0 * se, "component {j}: {freq} vs {a}");
        }
    }

    #[test]
    fn same_seed_same_data() {
        let (spec, elem) = one_domain(vec![0.5, 0.5, 0.0, 0.0], 50);
        assert_eq!(
            sample_domain(&spec, &elem, 1).unwrap(),
            sample_domain(&spec, &elem, 1).unwrap()
        );
        assert_ne!(
            sample_domain(&spec, &elem, 1).unwrap(),
            sample_domain(&spec, &elem, 2).unwrap()
        );
    }

    #[test]
    fn benchmark_alphas_on_simplex_and_distinct() {
        for seed in 0..20 {
            let b = make_benchmark(&BenchmarkParams {
                seed,
                ..Default::default()
            })
            .unwrap();
            for d in &b.domains {
                assert!((d.alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
            let target = b.role(DomainRole::Target).next().unwrap();
            for s in b.role(DomainRole::Source) {
                assert!(l1(&s.alpha, &target.alpha) > MIN_TARGET_L1);
            }
            assert_eq!(b.role(DomainRole::Validation).count(), 3);
        }
    }

    #[test]
    fn single_component_benchmark_is_degenerate_but_valid() {
        let b = make_benchmark(&BenchmarkParams {
            k: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(b.domains.iter().all(|d| d.alpha == vec![1.0]));
        let splits = b.sample().unwrap();
        assert_eq!(splits.train.len(), 3 * 400);
        assert_eq!(splits.validation.len(), 3 * 100);
        assert_eq!(splits.target.len(), 1000);
    }

    #[test]
    fn centers_are_equidistant() {
        for (k, dim) in [(4, 4), (3, 8), (5, 2)] {
            let c = component_centers(k, dim, 6.0);
            for a in 0..k {
                let b = (a + 1) % k;
                let d: f64 = c
                    .row(a)
                    .iter()
                    .zip(c.row(b).iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                assert!((d.sqrt() - 6.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let (spec, elem) = one_domain(vec![0.25; 4], 30);
        let d = sample_domain(&spec, &elem, 3).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("domain_id,label,tag,f0,f1,f2,f3\n"));
        let back: Dataset<f64> = read_dataset_csv(&buf[..]).unwrap();
        assert_eq!(back, d);
        assert!(read_dataset_csv::<f64, _>("a,b\n".as_bytes()).is_err());
        assert!(read_dataset_csv::<f64, _>("domain_id,label,tag,f0\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn params_kv_round_trip_and_unknown_key() {
        let p = BenchmarkParams {
            k: 3,
            separation: 10.0,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(BenchmarkParams::from_kv(&p.to_kv()).unwrap(), p);
        assert!(matches!(
            BenchmarkParams::from_kv("k = 3\nbogus = 1"),
            Err(GduError::Parse { line: 2, .. })
        ));
        assert!(BenchmarkParams::from_kv("k = three").is_err());
    }
}
