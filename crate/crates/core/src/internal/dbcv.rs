//! Density-based cluster validation.
//!
//! Per-cluster validity compares density sparseness (the widest internal
//! edge of the cluster's mutual-reachability minimum spanning tree)
//! against density separation (the closest mutual-reachability gap to any
//! other cluster). Cluster scores are weighted by cluster size over the
//! full observation count, so unclustered observations lower the total.

use crate::model::{Dataset, DistanceMatrix, Partition};
use crate::{Error, Result};

use super::ClusterView;

/// DBCV in [-1, 1]; higher is better.
pub fn dbcv(dataset: &Dataset, dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    let view = ClusterView::new(partition);
    if view.k() < 2 {
        return Err(Error::IndexUndefined("dbcv needs k >= 2".into()));
    }
    let v = dbcv_view(&dataset.points, dist, &view, partition.labels.len());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::IndexUndefined("dbcv produced a non-finite value".into()))
    }
}

pub(crate) fn dbcv_view(
    points: &[Vec<f64>],
    dist: &DistanceMatrix,
    view: &ClusterView,
    n_total: usize,
) -> f64 {
    let dims = points[0].len() as f64;
    let k = view.clusters.len();

    // All-points core distance, computed within each point's own cluster.
    let mut core_dist = vec![0.0f64; dist.n()];
    for members in &view.clusters {
        if members.len() < 2 {
            continue;
        }
        for &i in members {
            let mut acc = 0.0;
            for &j in members {
                if i == j {
                    continue;
                }
                acc += (1.0 / dist.get(i, j)).powf(dims);
            }
            core_dist[i] = (acc / (members.len() - 1) as f64).powf(-1.0 / dims);
        }
    }

    let mreach = |i: usize, j: usize| core_dist[i].max(core_dist[j]).max(dist.get(i, j));

    // Per-cluster MST, sparseness, and internal node sets.
    let mut sparseness = vec![0.0f64; k];
    let mut internal_nodes: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, members) in view.clusters.iter().enumerate() {
        if members.len() < 2 {
            internal_nodes[c] = members.clone();
            sparseness[c] = 0.0;
            continue;
        }
        let edges = prim_mst(members, &mreach);
        let mut degree = vec![0usize; members.len()];
        for &(a, b, _) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut internal: Vec<usize> =
            (0..members.len()).filter(|&x| degree[x] > 1).map(|x| members[x]).collect();
        if internal.is_empty() {
            internal = members.clone();
        }
        internal_nodes[c] = internal;
        let internal_edges: Vec<f64> = edges
            .iter()
            .filter(|&&(a, b, _)| degree[a] > 1 && degree[b] > 1)
            .map(|&(_, _, w)| w)
            .collect();
        sparseness[c] = if internal_edges.is_empty() {
            edges.iter().map(|&(_, _, w)| w).fold(0.0, f64::max)
        } else {
            internal_edges.into_iter().fold(0.0, f64::max)
        };
    }

    let mut total = 0.0;
    for c in 0..k {
        let mut separation = f64::INFINITY;
        for o in 0..k {
            if o == c {
                continue;
            }
            for &i in &internal_nodes[c] {
                for &j in &internal_nodes[o] {
                    separation = separation.min(mreach(i, j));
                }
            }
        }
        let denom = separation.max(sparseness[c]);
        let validity = if denom > 0.0 { (separation - sparseness[c]) / denom } else { 0.0 };
        total += view.clusters[c].len() as f64 / n_total as f64 * validity;
    }
    total
}

/// Prim's algorithm over the complete graph on `members` with weight `w`.
/// Returns edges as (local index, local index, weight).
fn prim_mst<F: Fn(usize, usize) -> f64>(members: &[usize], w: &F) -> Vec<(usize, usize, f64)> {
    let n = members.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    in_tree[0] = true;
    for x in 1..n {
        best[x] = w(members[0], members[x]);
    }
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_w = f64::INFINITY;
        for x in 0..n {
            if !in_tree[x] && best[x] < pick_w {
                pick_w = best[x];
                pick = x;
            }
        }
        in_tree[pick] = true;
        edges.push((parent[pick], pick, pick_w));
        for x in 0..n {
            if !in_tree[x] {
                let cand = w(members[pick], members[x]);
                if cand < best[x] {
                    best[x] = cand;
                    parent[x] = pick;
                }
            }
        }
    }
    edges
}
