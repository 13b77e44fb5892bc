//! Silhouette and Dunn, computable from the distance matrix alone.

use crate::model::{DistanceMatrix, Partition};
use crate::{Error, Result};

use super::ClusterView;

/// Mean silhouette width: s(i) = (b - a) / max(a, b) with a the mean
/// intra-cluster distance and b the smallest mean distance to another
/// cluster. Singletons score 0, and 0/0 is defined as 0.
pub fn silhouette(dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    let view = ClusterView::new(partition);
    if view.k() < 2 {
        return Err(Error::IndexUndefined("silhouette needs k >= 2".into()));
    }
    Ok(silhouette_view(dist, &view))
}

pub(crate) fn silhouette_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let mut total = 0.0;
    for (c, members) in view.clusters.iter().enumerate() {
        for &i in members {
            if members.len() == 1 {
                continue; // s = 0
            }
            let a: f64 = members.iter().filter(|&&j| j != i).map(|&j| dist.get(i, j)).sum::<f64>()
                / (members.len() - 1) as f64;
            let mut b = f64::INFINITY;
            for (o, others) in view.clusters.iter().enumerate() {
                if o == c {
                    continue;
                }
                let mean =
                    others.iter().map(|&j| dist.get(i, j)).sum::<f64>() / others.len() as f64;
                b = b.min(mean);
            }
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    total / view.n_prime() as f64
}

/// Smallest single-link inter-cluster distance over the largest cluster
/// diameter.
pub fn dunn(dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    let view = ClusterView::new(partition);
    if view.k() < 2 {
        return Err(Error::IndexUndefined("dunn needs k >= 2".into()));
    }
    Ok(dunn_view(dist, &view))
}

pub(crate) fn dunn_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let mut min_between = f64::INFINITY;
    for a in 0..view.clusters.len() {
        for b in (a + 1)..view.clusters.len() {
            for &i in &view.clusters[a] {
                for &j in &view.clusters[b] {
                    min_between = min_between.min(dist.get(i, j));
                }
            }
        }
    }
    let mut max_diameter = 0.0f64;
    for members in &view.clusters {
        for x in 0..members.len() {
            for y in (x + 1)..members.len() {
                max_diameter = max_diameter.max(dist.get(members[x], members[y]));
            }
        }
    }
    min_between / max_diameter
}
