//! Shared data model: labeled datasets, candidate partitions, distance
//! matrices and tied-rank utilities.

mod distance;
mod ranks;

pub use distance::{compute_distance_matrix, DistanceMatrix};
pub use ranks::{average_ranks, Orientation};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cluster label. Non-negative values are cluster ids, [`NOISE`] marks
/// observations left unclustered.
pub type Label = i32;

/// Sentinel for unclustered observations. Never counted as a cluster.
pub const NOISE: Label = -1;

/// Radial distribution a cluster's points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Gaussian,
    Logistic,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Gaussian => "gaussian",
            Distribution::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Distribution::Uniform),
            "gaussian" => Ok(Distribution::Gaussian),
            "logistic" => Ok(Distribution::Logistic),
            other => Err(Error::InvalidConfig(format!("unknown distribution `{other}`"))),
        }
    }
}

/// Coarse compactness class a dataset was generated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompactnessLevel {
    Compact,
    Sparse,
    Random,
}

impl CompactnessLevel {
    pub fn name(self) -> &'static str {
        match self {
            CompactnessLevel::Compact => "compact",
            CompactnessLevel::Sparse => "sparse",
            CompactnessLevel::Random => "random",
        }
    }
}

/// Generation-time properties of a dataset, kept alongside the data so
/// evaluation results can be broken down by property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTags {
    pub k_star: usize,
    pub dimensions: usize,
    /// Fraction of points whose nearest neighbour is in another cluster.
    pub overlap: f64,
    /// (largest cluster - smallest cluster) / smallest cluster.
    pub imbalance: f64,
    pub has_noise: bool,
    /// Unknown for datasets loaded without a manifest.
    pub compactness_level: Option<CompactnessLevel>,
    /// Unknown for datasets loaded without a manifest.
    pub distribution: Option<Distribution>,
}

/// Ground-truth labeling of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: Vec<Label>,
    /// Number of distinct non-noise clusters.
    pub k_star: usize,
    /// Fraction of observations labeled [`NOISE`].
    pub noise_fraction: f64,
}

impl GroundTruth {
    pub fn from_labels(labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        let k_star = count_clusters(&labels);
        if k_star == 0 {
            return Err(Error::Degenerate("ground truth has no non-noise cluster".into()));
        }
        let noise = labels.iter().filter(|&&l| l == NOISE).count();
        let noise_fraction = noise as f64 / labels.len() as f64;
        Ok(GroundTruth { labels, k_star, noise_fraction })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// One observation matrix with its ground truth and property tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    /// N rows of D features each.
    pub points: Vec<Vec<f64>>,
    pub truth: GroundTruth,
    pub meta: PropertyTags,
}

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        points: Vec<Vec<f64>>,
        labels: Vec<Label>,
        meta: PropertyTags,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig("dataset needs at least 2 observations".into()));
        }
        let dims = points[0].len();
        if dims == 0 {
            return Err(Error::InvalidConfig("dataset needs at least 1 dimension".into()));
        }
        for (row, p) in points.iter().enumerate() {
            if p.len() != dims {
                return Err(Error::LengthMismatch { left: dims, right: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row });
            }
        }
        if labels.len() != points.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: labels.len() });
        }
        let truth = GroundTruth::from_labels(labels)?;
        Ok(Dataset { id: id.into(), points, truth, meta })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dims(&self) -> usize {
        self.points[0].len()
    }

    /// Indices of observations that are not ground-truth noise.
    pub fn core_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.truth.labels[i] != NOISE).collect()
    }
}

/// A candidate labeling of a dataset's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<Label>,
    /// Number of distinct non-noise clusters actually present.
    pub k: usize,
    /// Provenance tag, e.g. `kmeans(k=5)` or `p1(step=2)`.
    pub source: String,
}

impl Partition {
    pub fn new(labels: Vec<Label>, source: impl Into<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        let k = count_clusters(&labels);
        if k == 0 {
            return Err(Error::Degenerate("partition has no non-noise cluster".into()));
        }
        Ok(Partition { labels, k, source: source.into() })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Labels renamed in order of first appearance; see [`canonical_form`].
    pub fn canonical(&self) -> Vec<Label> {
        canonical_form(&self.labels)
    }
}

/// Ordered candidate partitions for one (dataset, source) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionCollection {
    pub dataset_id: String,
    /// Producing algorithm or procedure.
    pub source: String,
    pub partitions: Vec<Partition>,
}

fn count_clusters(labels: &[Label]) -> usize {
    let mut seen: Vec<Label> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Renames cluster ids in order of first appearance, leaving [`NOISE`]
/// untouched. Two labelings describe the same partition iff their
/// canonical forms are identical.
pub fn canonical_form(labels: &[Label]) -> Vec<Label> {
    let mut map: Vec<(Label, Label)> = Vec::new();
    let mut next: Label = 0;
    labels
        .iter()
        .map(|&l| {
            if l == NOISE {
                return NOISE;
            }
            if let Some(&(_, to)) = map.iter().find(|&&(from, _)| from == l) {
                to
            } else {
                let to = next;
                map.push((l, to));
                next += 1;
                to
            }
        })
        .collect()
}
