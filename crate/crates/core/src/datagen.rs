//! Synthetic dataset generation with controlled cluster count,
//! dimensionality, size balance, compactness, radial distribution,
//! overlap and background noise.
//!
//! Clusters are globular: each point is `center + r * u` with `u` a
//! uniformly random unit direction and `r` a radial draw from the
//! configured distribution scaled per cluster. Center placement is
//! rejection-sampled until the measured overlap stays under the
//! configured ceiling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CompactnessLevel, Dataset, Distribution, PropertyTags, NOISE};
use crate::seed::derive_seed;
use crate::{Error, Result};

/// How cluster sizes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceMode {
    /// All clusters the same size.
    Balanced,
    /// Random sizes, no cluster below half the average.
    HalfFloor,
    /// Random sizes, no cluster below 10% of the average.
    TenthFloor,
}

impl ImbalanceMode {
    pub fn name(self) -> &'static str {
        match self {
            ImbalanceMode::Balanced => "balanced",
            ImbalanceMode::HalfFloor => "half_floor",
            ImbalanceMode::TenthFloor => "tenth_floor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balanced" => Ok(ImbalanceMode::Balanced),
            "half_floor" => Ok(ImbalanceMode::HalfFloor),
            "tenth_floor" => Ok(ImbalanceMode::TenthFloor),
            other => Err(Error::InvalidConfig(format!("unknown imbalance mode `{other}`"))),
        }
    }
}

/// Per-cluster radial scale selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compactness {
    /// Every cluster uses this radial scale.
    Fixed(f64),
    /// Each cluster draws its scale uniformly from (0, 1].
    RandomUnit,
}

impl Compactness {
    pub fn level(self) -> CompactnessLevel {
        match self {
            Compactness::Fixed(v) => {
                if v < 0.45 {
                    CompactnessLevel::Compact
                } else {
                    CompactnessLevel::Sparse
                }
            }
            Compactness::RandomUnit => CompactnessLevel::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub k_star: usize,
    pub dimensions: usize,
    pub cluster_size_range: (usize, usize),
    pub total_cap: usize,
    pub distribution: Distribution,
    pub imbalance_mode: ImbalanceMode,
    pub compactness: Compactness,
    pub noise_fraction: f64,
    pub overlap_max: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            k_star: 2,
            dimensions: 2,
            cluster_size_range: (20, 100),
            total_cap: 1000,
            distribution: Distribution::Gaussian,
            imbalance_mode: ImbalanceMode::Balanced,
            compactness: Compactness::Fixed(0.1),
            noise_fraction: 0.0,
            overlap_max: 0.10,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.cluster_size_range;
        if self.k_star < 2 {
            return Err(Error::InvalidConfig("k_star must be >= 2".into()));
        }
        if self.dimensions == 0 {
            return Err(Error::InvalidConfig("dimensions must be >= 1".into()));
        }
        if lo < 1 || lo > hi || hi > self.total_cap {
            return Err(Error::InvalidConfig(format!(
                "cluster_size_range ({lo},{hi}) must lie within [1, total_cap={}]",
                self.total_cap
            )));
        }
        if self.k_star * lo > self.total_cap {
            return Err(Error::InvalidConfig(format!(
                "k_star * min_size = {} exceeds total_cap = {}",
                self.k_star * lo,
                self.total_cap
            )));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::InvalidConfig("noise_fraction must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap_max) {
            return Err(Error::InvalidConfig("overlap_max must be in [0, 1]".into()));
        }
        if let Compactness::Fixed(v) = self.compactness {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig("fixed compactness must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "k*={} D={} sizes={:?} cap={} dist={} imbalance={} noise={} overlap_max={} seed={}",
            self.k_star,
            self.dimensions,
            self.cluster_size_range,
            self.total_cap,
            self.distribution.name(),
            self.imbalance_mode.name(),
            self.noise_fraction,
            self.overlap_max,
            self.seed,
        )
    }
}

/// Geometry of one generated cluster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: Vec<f64>,
    pub scale: f64,
    pub size: usize,
    pub distribution: Distribution,
}

const RETRY_BUDGET: usize = 50;

/// Generates a dataset honoring the config; deterministic given the seed.
/// Fails after the retry budget if the overlap ceiling cannot be met.
pub fn generate_dataset(id: impl Into<String>, config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let id = id.into();
    for attempt in 0..RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, attempt as u64));
        let specs = draw_cluster_specs(config, &mut rng);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (c, spec) in specs.iter().enumerate() {
            for _ in 0..spec.size {
                points.push(sample_point(spec, &mut rng));
                labels.push(c as i32);
            }
        }
        let core = Dataset::new(
            id.clone(),
            points,
            labels,
            PropertyTags {
                k_star: config.k_star,
                dimensions: config.dimensions,
                overlap: 0.0,
                imbalance: 0.0,
                has_noise: false,
                compactness_level: Some(config.compactness.level()),
                distribution: Some(config.distribution),
            },
        )?;
        let overlap = measure_overlap(&core)?;
        if overlap > config.overlap_max {
            continue;
        }
        let mut dataset = inject_noise_with_rng(&core, config.noise_fraction, &mut rng)?;
        dataset.meta.overlap = overlap;
        dataset.meta.imbalance = measure_imbalance(&dataset)?;
        dataset.meta.has_noise = dataset.truth.noise_count() > 0;
        return Ok(dataset);
    }
    Err(Error::OverlapUnattainable { retries: RETRY_BUDGET, config: config.describe() })
}

fn draw_cluster_specs(config: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<ClusterSpec> {
    let sizes = draw_sizes(config, rng);
    let scales: Vec<f64> = (0..config.k_star)
        .map(|_| match config.compactness {
            Compactness::Fixed(v) => v,
            Compactness::RandomUnit => rng.gen_range(0.001f64..=1.0),
        })
        .collect();
    let mean_scale = scales.iter().sum::<f64>() / scales.len() as f64;
    // Cube side chosen so expected nearest-center spacing is ~4x the mean
    // radial scale; the overlap ceiling is then enforced by rejection.
    let side = 4.0 * mean_scale * (config.k_star as f64).powf(1.0 / config.dimensions as f64);
    (0..config.k_star)
        .map(|i| ClusterSpec {
            center: (0..config.dimensions).map(|_| rng.gen_range(0.0..side)).collect(),
            scale: scales[i],
            size: sizes[i],
            distribution: config.distribution,
        })
        .collect()
}

fn draw_sizes(config: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = config.k_star;
    let (lo, hi) = config.cluster_size_range;
    let cap_per_cluster = config.total_cap / k;
    match config.imbalance_mode {
        ImbalanceMode::Balanced => {
            let s = rng.gen_range(lo..=hi).min(cap_per_cluster).max(1);
            vec![s; k]
        }
        ImbalanceMode::HalfFloor | ImbalanceMode::TenthFloor => {
            let frac = if config.imbalance_mode == ImbalanceMode::HalfFloor { 0.5 } else { 0.1 };
            let avg = rng.gen_range(lo..=hi).min(cap_per_cluster).max(1);
            let floor = ((frac * avg as f64) + 0.5).floor().max(1.0) as usize;
            let upper = (2 * avg).saturating_sub(floor).max(floor);
            let mut sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(floor..=upper)).collect();
            // Trim deterministically if the random draw blew the cap.
            while sizes.iter().sum::<usize>() > config.total_cap {
                let imax = (0..k).max_by_key(|&i| (sizes[i], i)).unwrap();
                if sizes[imax] <= floor {
                    break;
                }
                sizes[imax] -= 1;
            }
            sizes
        }
    }
}

fn sample_point(spec: &ClusterSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = spec.center.len();
    let u = random_unit_vector(d, rng);
    let r = radial_draw(spec.distribution, spec.scale, rng);
    (0..d).map(|t| spec.center[t] + r * u[t]).collect()
}

fn random_unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn radial_draw(distribution: Distribution, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    match distribution {
        Distribution::Gaussian => (scale * standard_normal(rng)).abs(),
        Distribution::Uniform => rng.gen_range(0.0..=scale),
        Distribution::Logistic => {
            let u: f64 = rng.gen_range(1e-12..1.0);
            (scale * (u / (1.0 - u)).ln()).abs()
        }
    }
}

/// Box-Muller draw; one value per call keeps the stream layout simple.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Fraction of non-noise points whose nearest non-noise neighbour belongs
/// to a different ground-truth cluster. Nearest-neighbour ties resolve to
/// the lowest point index.
pub fn measure_overlap(dataset: &Dataset) -> Result<f64> {
    let core = dataset.core_indices();
    if core.len() < 2 {
        return Err(Error::InvalidConfig("overlap needs at least 2 non-noise points".into()));
    }
    let mut cross = 0usize;
    for (a, &i) in core.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for (b, &j) in core.iter().enumerate() {
            if a == b {
                continue;
            }
            let d = euclidean(&dataset.points[i], &dataset.points[j]);
            if d < best {
                best = d;
                best_j = j;
            }
        }
        if dataset.truth.labels[best_j] != dataset.truth.labels[i] {
            cross += 1;
        }
    }
    Ok(cross as f64 / core.len() as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// (largest - smallest) / smallest over non-noise ground-truth clusters.
pub fn measure_imbalance(dataset: &Dataset) -> Result<f64> {
    let mut counts: Vec<(i32, usize)> = Vec::new();
    for &l in &dataset.truth.labels {
        if l == NOISE {
            continue;
        }
        match counts.iter_mut().find(|(lab, _)| *lab == l) {
            Some((_, c)) => *c += 1,
            None => counts.push((l, 1)),
        }
    }
    let min = counts.iter().map(|&(_, c)| c).min().ok_or(Error::Empty)?;
    let max = counts.iter().map(|&(_, c)| c).max().unwrap();
    if min == 0 {
        return Err(Error::Degenerate("empty cluster in imbalance computation".into()));
    }
    Ok((max - min) as f64 / min as f64)
}

/// Appends `round(fraction * N_core)` noise points, each coordinate drawn
/// uniformly within that dimension's [min, max] over the core data.
pub fn inject_noise(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inject_noise_with_rng(dataset, fraction, &mut rng)
}

fn inject_noise_with_rng(
    dataset: &Dataset,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig("noise fraction must be in [0, 1)".into()));
    }
    if dataset.truth.noise_count() > 0 {
        return Err(Error::InvalidConfig("core dataset must be noise-free".into()));
    }
    if fraction == 0.0 {
        return Ok(dataset.clone());
    }
    let n_core = dataset.n();
    let count = (fraction * n_core as f64 + 0.5).floor() as usize;
    if count == 0 {
        return Ok(dataset.clone());
    }
    let dims = dataset.dims();
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for p in &dataset.points {
        for t in 0..dims {
            lo[t] = lo[t].min(p[t]);
            hi[t] = hi[t].max(p[t]);
        }
    }
    let mut points = dataset.points.clone();
    let mut labels = dataset.truth.labels.clone();
    for _ in 0..count {
        points.push((0..dims).map(|t| rng.gen_range(lo[t]..=hi[t])).collect());
        labels.push(NOISE);
    }
    let mut meta = dataset.meta.clone();
    meta.has_noise = true;
    Dataset::new(dataset.id.clone(), points, labels, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Label;

    fn dataset_from(points: Vec<Vec<f64>>, labels: Vec<Label>) -> Dataset {
        let meta = PropertyTags {
            k_star: 0,
            dimensions: points[0].len(),
            overlap: 0.0,
            imbalance: 0.0,
            has_noise: false,
            compactness_level: None,
            distribution: None,
        };
        Dataset::new("t", points, labels, meta).unwrap()
    }

    #[test]
    fn overlap_zero_when_clusters_are_tight() {
        let d = dataset_from(
            vec![vec![0.0], vec![1.0], vec![100.0], vec![101.0]],
            vec![0, 0, 1, 1],
        );
        assert_eq!(measure_overlap(&d).unwrap(), 0.0);
    }

    #[test]
    fn overlap_one_when_strictly_alternating() {
        let d = dataset_from(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0, 1]);
        assert_eq!(measure_overlap(&d).unwrap(), 1.0);
    }

    #[test]
    fn overlap_zero_for_single_cluster() {
        let d = dataset_from(vec![vec![0.0], vec![5.0], vec![9.0]], vec![0, 0, 0]);
        assert_eq!(measure_overlap(&d).unwrap(), 0.0);
    }

    #[test]
    fn overlap_matches_brute_force_oracle() {
        let cfg = GenConfig {
            k_star: 3,
            dimensions: 2,
            cluster_size_range: (10, 10),
            overlap_max: 1.0,
            compactness: Compactness::Fixed(0.6),
            seed: 42,
            ..GenConfig::default()
        };
        let d = generate_dataset("oracle", &cfg).unwrap();
        // Independent all-pairs scan with the same lowest-index tie rule.
        let n = d.n();
        let mut cross = 0usize;
        for i in 0..n {
            let mut best = f64::INFINITY;
            let mut who = usize::MAX;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut acc = 0.0;
                for t in 0..d.dims() {
                    acc += (d.points[i][t] - d.points[j][t]).powi(2);
                }
                let dist = acc.sqrt();
                if dist < best {
                    best = dist;
                    who = j;
                }
            }
            if d.truth.labels[who] != d.truth.labels[i] {
                cross += 1;
            }
        }
        assert_eq!(measure_overlap(&d).unwrap(), cross as f64 / n as f64);
    }

    #[test]
    fn imbalance_examples() {
        let mk = |sizes: &[usize]| {
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for (c, &s) in sizes.iter().enumerate() {
                for i in 0..s {
                    points.push(vec![c as f64 * 100.0 + i as f64 * 1e-3]);
                    labels.push(c as i32);
                }
            }
            dataset_from(points, labels)
        };
        assert_eq!(measure_imbalance(&mk(&[50, 50, 50])).unwrap(), 0.0);
        assert_eq!(measure_imbalance(&mk(&[60, 20])).unwrap(), 2.0);
        assert_eq!(measure_imbalance(&mk(&[100, 40, 10])).unwrap(), 9.0);
    }

    #[test]
    fn generated_dataset_meets_postconditions() {
        let cfg = GenConfig { k_star: 2, seed: 7, ..GenConfig::default() };
        let d = generate_dataset("g", &cfg).unwrap();
        assert_eq!(d.truth.k_star, 2);
        assert!(measure_overlap(&d).unwrap() <= 0.10);
        assert_eq!(measure_imbalance(&d).unwrap(), 0.0, "balanced mode gives equal sizes");
    }

    #[test]
    fn noise_points_fill_ten_percent_and_stay_in_bounds() {
        let cfg = GenConfig {
            k_star: 4,
            cluster_size_range: (50, 50),
            noise_fraction: 0.10,
            seed: 3,
            ..GenConfig::default()
        };
        let d = generate_dataset("n", &cfg).unwrap();
        assert_eq!(d.n(), 220, "200 core + 20 noise");
        assert_eq!(d.truth.noise_count(), 20);
        let core: Vec<usize> = d.core_indices();
        let dims = d.dims();
        for t in 0..dims {
            let lo = core.iter().map(|&i| d.points[i][t]).fold(f64::INFINITY, f64::min);
            let hi = core.iter().map(|&i| d.points[i][t]).fold(f64::NEG_INFINITY, f64::max);
            for i in 0..d.n() {
                if d.truth.labels[i] == NOISE {
                    assert!(d.points[i][t] >= lo && d.points[i][t] <= hi);
                }
            }
        }
    }

    #[test]
    fn inject_zero_fraction_is_identity() {
        let cfg = GenConfig { seed: 9, ..GenConfig::default() };
        let d = generate_dataset("z", &cfg).unwrap();
        let same = inject_noise(&d, 0.0, 1).unwrap();
        assert_eq!(d, same);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            k_star: 3,
            noise_fraction: 0.10,
            imbalance_mode: ImbalanceMode::HalfFloor,
            seed: 1234,
            ..GenConfig::default()
        };
        let a = generate_dataset("d", &cfg).unwrap();
        let b = generate_dataset("d", &cfg).unwrap();
        assert_eq!(a, b, "same config + seed must be bitwise identical");
    }

    #[test]
    fn tags_match_remeasured_values() {
        let cfg = GenConfig {
            k_star: 4,
            imbalance_mode: ImbalanceMode::TenthFloor,
            noise_fraction: 0.10,
            seed: 5,
            ..GenConfig::default()
        };
        let d = generate_dataset("tags", &cfg).unwrap();
        assert!((d.meta.overlap - measure_overlap(&d).unwrap()).abs() < 1e-12);
        assert!((d.meta.imbalance - measure_imbalance(&d).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn min_size_over_cap_is_rejected() {
        let cfg = GenConfig {
            k_star: 60,
            cluster_size_range: (20, 100),
            total_cap: 1000,
            ..GenConfig::default()
        };
        assert!(matches!(generate_dataset("r", &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn gaussian_radial_second_moment() {
        // For the gaussian radial construction the covariance trace is
        // scale^2 in expectation; allow 20% at size 500.
        let scale = 0.3;
        let cfg = GenConfig {
            k_star: 2,
            dimensions: 3,
            cluster_size_range: (500, 500),
            total_cap: 1000,
            compactness: Compactness::Fixed(scale),
            overlap_max: 1.0,
            seed: 77,
            ..GenConfig::default()
        };
        let d = generate_dataset("cov", &cfg).unwrap();
        for c in 0..2 {
            let idx: Vec<usize> = (0..d.n()).filter(|&i| d.truth.labels[i] == c as i32).collect();
            let dims = d.dims();
            let mut mean = vec![0.0; dims];
            for &i in &idx {
                for t in 0..dims {
                    mean[t] += d.points[i][t];
                }
            }
            for m in mean.iter_mut() {
                *m /= idx.len() as f64;
            }
            let mut trace = 0.0;
            for &i in &idx {
                for t in 0..dims {
                    trace += (d.points[i][t] - mean[t]).powi(2);
                }
            }
            trace /= idx.len() as f64;
            let expected = scale * scale;
            assert!(
                (trace - expected).abs() / expected < 0.2,
                "trace {trace} vs expected {expected}"
            );
        }
    }
}
