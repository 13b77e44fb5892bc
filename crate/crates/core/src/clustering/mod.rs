//! Candidate partition production: K-Means and agglomerative linkage,
//! swept over cluster counts or repeated at a fixed count.

mod kmeans;
mod linkage;

pub use kmeans::run_kmeans;
pub use linkage::{cut_at, run_agglomerative, Dendrogram, LinkageMethod, Merge};

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Partition, PartitionCollection};
use crate::seed::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Single,
    Average,
    Complete,
    Ward,
}

impl Algorithm {
    pub fn all() -> [Algorithm; 5] {
        [Algorithm::KMeans, Algorithm::Single, Algorithm::Average, Algorithm::Complete, Algorithm::Ward]
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Single => "single",
            Algorithm::Average => "average",
            Algorithm::Complete => "complete",
            Algorithm::Ward => "ward",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" => Ok(Algorithm::KMeans),
            "single" => Ok(Algorithm::Single),
            "average" => Ok(Algorithm::Average),
            "complete" => Ok(Algorithm::Complete),
            "ward" => Ok(Algorithm::Ward),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }

    pub fn linkage(self) -> Option<LinkageMethod> {
        match self {
            Algorithm::KMeans => None,
            Algorithm::Single => Some(LinkageMethod::Single),
            Algorithm::Average => Some(LinkageMethod::Average),
            Algorithm::Complete => Some(LinkageMethod::Complete),
            Algorithm::Ward => Some(LinkageMethod::Ward),
        }
    }
}

/// Upper sweep limit: ceil(max(25, 1.75 k*)). Callers additionally cap at
/// N-1.
pub fn compute_k_max(k_star: usize) -> usize {
    25usize.max((7 * k_star + 3) / 4)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub k_min: usize,
    pub k_max: usize,
    pub algorithms: Vec<Algorithm>,
    /// Best-of restarts per k for K-Means sweeps.
    pub kmeans_restarts: usize,
}

impl SweepSpec {
    pub fn new(k_max: usize, algorithms: Vec<Algorithm>) -> Self {
        SweepSpec { k_min: 2, k_max, algorithms, kmeans_restarts: 1 }
    }
}

/// One partition per k in [k_min, min(k_max, N-1)] for each algorithm;
/// collections are keyed by (dataset, algorithm).
pub fn sweep_varied_k(
    dataset: &Dataset,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<PartitionCollection>> {
    if spec.k_min < 2 {
        return Err(Error::InvalidConfig("k_min must be >= 2".into()));
    }
    let k_hi = spec.k_max.min(dataset.n() - 1);
    if spec.k_min > k_hi {
        return Err(Error::InvalidConfig(format!(
            "empty sweep range [{}, {k_hi}]",
            spec.k_min
        )));
    }
    let mut out = Vec::with_capacity(spec.algorithms.len());
    for &algo in &spec.algorithms {
        let mut partitions = Vec::with_capacity(k_hi - spec.k_min + 1);
        match algo.linkage() {
            Some(method) => {
                let dendro = run_agglomerative(dataset, method)?;
                for k in spec.k_min..=k_hi {
                    partitions.push(cut_at(&dendro, k, &format!("{}(k={k})", algo.name()))?);
                }
            }
            None => {
                for k in spec.k_min..=k_hi {
                    partitions.push(best_of_kmeans(
                        dataset,
                        k,
                        spec.kmeans_restarts.max(1),
                        derive_seed(seed, k as u64),
                    )?);
                }
            }
        }
        out.push(PartitionCollection {
            dataset_id: dataset.id.clone(),
            source: algo.name().to_string(),
            partitions,
        });
    }
    Ok(out)
}

fn best_of_kmeans(dataset: &Dataset, k: usize, restarts: usize, seed: u64) -> Result<Partition> {
    let mut best: Option<(f64, Partition)> = None;
    for r in 0..restarts {
        let run = kmeans::kmeans_run(&dataset.points, k, derive_seed(seed, r as u64))?;
        let obj = *run.objective_trace.last().expect("trace populated");
        let partition = Partition::new(run.labels, format!("kmeans(k={k})"))?;
        best = match best {
            Some((cur, p)) if cur <= obj => Some((cur, p)),
            _ => Some((obj, partition)),
        };
    }
    Ok(best.expect("restarts >= 1").1)
}

/// Scenario-2 style candidates at one fixed k: `kmeans_runs` seeded
/// K-Means runs plus one cut per linkage method. Duplicates are left in;
/// callers dedupe via canonical forms.
pub fn fixed_k_candidates(
    dataset: &Dataset,
    k: usize,
    kmeans_runs: usize,
    seed: u64,
) -> Result<Vec<Partition>> {
    let mut out = Vec::with_capacity(kmeans_runs + 4);
    for run in 0..kmeans_runs {
        let labels = kmeans::kmeans_run(&dataset.points, k, derive_seed(seed, run as u64))?.labels;
        out.push(Partition::new(labels, format!("kmeans(k={k},run={run})"))?);
    }
    for method in [
        LinkageMethod::Single,
        LinkageMethod::Average,
        LinkageMethod::Complete,
        LinkageMethod::Ward,
    ] {
        let dendro = run_agglomerative(dataset, method)?;
        out.push(cut_at(&dendro, k, &format!("{}(k={k})", method.name()))?);
    }
    Ok(out)
}
