//! Internal validity indexes and the noise adjustment applied to them.
//!
//! All indexes evaluate a partition on the non-noise observations only;
//! the raw value is then rescaled by the clustered fraction (see
//! [`noise_adjust`]). DBCV is the exception: it weights cluster validity
//! by cluster size over the full observation count, handling noise
//! natively.

mod centroid;
mod dbcv;
mod distance_based;
mod pairs;

pub use dbcv::dbcv;
pub use distance_based::{dunn, silhouette};
pub use pairs::{aucc, pair_statistics, PairStatistics};

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, DistanceMatrix, Orientation, Partition, NOISE};
use crate::{Error, Result};

/// Identifier of one internal validity index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexId {
    Silhouette,
    Vrc,
    DaviesBouldin,
    Dunn,
    CIndex,
    Aucc,
    PointBiserial,
    Pbm,
    Wb,
    XieBeni,
    WemmertGancarski,
    RatkowskyLance,
    GPlus,
    Tau,
    Dbcv,
}

/// Whether an index scores separation/compactness, density, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    SepComp,
    Density,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDescriptor {
    pub id: IndexId,
    pub orientation: Orientation,
    pub approach: Approach,
    /// False for indexes computable from the distance matrix alone.
    pub requires_coordinates: bool,
}

impl IndexId {
    pub fn all() -> [IndexId; 15] {
        [
            IndexId::Silhouette,
            IndexId::Vrc,
            IndexId::DaviesBouldin,
            IndexId::Dunn,
            IndexId::CIndex,
            IndexId::Aucc,
            IndexId::PointBiserial,
            IndexId::Pbm,
            IndexId::Wb,
            IndexId::XieBeni,
            IndexId::WemmertGancarski,
            IndexId::RatkowskyLance,
            IndexId::GPlus,
            IndexId::Tau,
            IndexId::Dbcv,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            IndexId::Silhouette => "silhouette",
            IndexId::Vrc => "vrc",
            IndexId::DaviesBouldin => "davies_bouldin",
            IndexId::Dunn => "dunn",
            IndexId::CIndex => "c_index",
            IndexId::Aucc => "aucc",
            IndexId::PointBiserial => "point_biserial",
            IndexId::Pbm => "pbm",
            IndexId::Wb => "wb",
            IndexId::XieBeni => "xie_beni",
            IndexId::WemmertGancarski => "wemmert_gancarski",
            IndexId::RatkowskyLance => "ratkowsky_lance",
            IndexId::GPlus => "g_plus",
            IndexId::Tau => "tau",
            IndexId::Dbcv => "dbcv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let needle = s.trim().to_ascii_lowercase();
        IndexId::all()
            .into_iter()
            .find(|id| id.name() == needle)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown internal index `{s}`")))
    }

    pub fn descriptor(self) -> IndexDescriptor {
        use Orientation::{Max, Min};
        let (orientation, approach, coords) = match self {
            IndexId::Silhouette => (Max, Approach::SepComp, false),
            IndexId::Vrc => (Max, Approach::SepComp, true),
            IndexId::DaviesBouldin => (Min, Approach::SepComp, true),
            IndexId::Dunn => (Max, Approach::SepComp, false),
            IndexId::CIndex => (Min, Approach::SepComp, false),
            IndexId::Aucc => (Max, Approach::SepComp, false),
            IndexId::PointBiserial => (Max, Approach::SepComp, false),
            IndexId::Pbm => (Max, Approach::SepComp, true),
            IndexId::Wb => (Min, Approach::SepComp, true),
            IndexId::XieBeni => (Min, Approach::SepComp, true),
            IndexId::WemmertGancarski => (Max, Approach::SepComp, true),
            IndexId::RatkowskyLance => (Max, Approach::SepComp, true),
            IndexId::GPlus => (Min, Approach::SepComp, false),
            IndexId::Tau => (Max, Approach::SepComp, false),
            IndexId::Dbcv => (Max, Approach::Density, true),
        };
        IndexDescriptor { id: self, orientation, approach, requires_coordinates: coords }
    }

    pub fn orientation(self) -> Orientation {
        self.descriptor().orientation
    }
}

/// One index evaluation: raw value and its noise-adjusted counterpart.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexScore {
    pub index: IndexId,
    pub orientation: Orientation,
    pub raw: f64,
    pub adjusted: f64,
}

/// Rescales a raw index value by the clustered fraction (N - N_noise)/N.
/// Skipped where it would reward instead of penalize: negative values of
/// max-indexes and positive values of min-indexes.
pub fn noise_adjust(raw: f64, orientation: Orientation, n: usize, n_noise: usize) -> Result<f64> {
    if n_noise >= n {
        return Err(Error::InvalidConfig(format!("n_noise = {n_noise} must be < n = {n}")));
    }
    let skip = match orientation {
        Orientation::Max => raw < 0.0,
        Orientation::Min => raw > 0.0,
    };
    if skip {
        return Ok(raw);
    }
    Ok(raw * (n - n_noise) as f64 / n as f64)
}

/// Non-noise observations grouped by partition cluster, in label
/// first-appearance order. Indices refer to the original dataset rows.
pub(crate) struct ClusterView {
    pub clusters: Vec<Vec<usize>>,
    pub core: Vec<usize>,
}

impl ClusterView {
    pub fn new(partition: &Partition) -> Self {
        let mut order: Vec<i32> = Vec::new();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut core = Vec::new();
        for (i, &l) in partition.labels.iter().enumerate() {
            if l == NOISE {
                continue;
            }
            core.push(i);
            match order.iter().position(|&x| x == l) {
                Some(c) => clusters[c].push(i),
                None => {
                    order.push(l);
                    clusters.push(vec![i]);
                }
            }
        }
        ClusterView { clusters, core }
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_prime(&self) -> usize {
        self.core.len()
    }
}

/// Computes one internal index on a (dataset, partition) pair and applies
/// the noise adjustment. Undefined cases (k < 2, k >= N', all points
/// identical, non-finite values) surface as [`Error::IndexUndefined`].
pub fn compute_internal(
    id: IndexId,
    dataset: &Dataset,
    dist: &DistanceMatrix,
    partition: &Partition,
) -> Result<IndexScore> {
    if partition.labels.len() != dataset.n() {
        return Err(Error::LengthMismatch { left: dataset.n(), right: partition.labels.len() });
    }
    let view = ClusterView::new(partition);
    let k = view.k();
    let np = view.n_prime();
    if k < 2 {
        return Err(Error::IndexUndefined(format!("{}: k = {k} < 2", id.name())));
    }
    if k >= np {
        return Err(Error::IndexUndefined(format!("{}: k = {k} >= N' = {np}", id.name())));
    }
    if all_points_identical(dataset, &view) {
        return Err(Error::IndexUndefined(format!("{}: zero variance", id.name())));
    }

    let raw = match id {
        IndexId::Silhouette => distance_based::silhouette_view(dist, &view),
        IndexId::Dunn => distance_based::dunn_view(dist, &view),
        IndexId::CIndex => pairs::c_index_view(dist, &view),
        IndexId::Aucc => pairs::aucc_view(dist, &view),
        IndexId::PointBiserial => pairs::point_biserial_view(dist, &view),
        IndexId::GPlus => pairs::g_plus_view(dist, &view),
        IndexId::Tau => pairs::tau_view(dist, &view),
        IndexId::Vrc => centroid::vrc(&dataset.points, &view),
        IndexId::DaviesBouldin => centroid::davies_bouldin(&dataset.points, &view),
        IndexId::Pbm => centroid::pbm(&dataset.points, &view),
        IndexId::Wb => centroid::wb(&dataset.points, &view),
        IndexId::XieBeni => centroid::xie_beni(&dataset.points, &view),
        IndexId::WemmertGancarski => centroid::wemmert_gancarski(&dataset.points, &view),
        IndexId::RatkowskyLance => centroid::ratkowsky_lance(&dataset.points, &view),
        IndexId::Dbcv => dbcv::dbcv_view(&dataset.points, dist, &view, partition.labels.len()),
    };
    if !raw.is_finite() {
        return Err(Error::IndexUndefined(format!("{}: non-finite value", id.name())));
    }
    let orientation = id.orientation();
    let adjusted = if id == IndexId::Dbcv {
        raw
    } else {
        noise_adjust(raw, orientation, dataset.n(), partition.noise_count())?
    };
    Ok(IndexScore { index: id, orientation, raw, adjusted })
}

fn all_points_identical(dataset: &Dataset, view: &ClusterView) -> bool {
    let Some(&first) = view.core.first() else {
        return true;
    };
    view.core.iter().all(|&i| dataset.points[i] == dataset.points[first])
}
