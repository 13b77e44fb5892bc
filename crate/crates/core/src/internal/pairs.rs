//! Point-pair machinery shared by the concordance-style indexes
//! (C-index, AUCC, Point-Biserial, G(+), Tau).
//!
//! A (within, between) pair of distances is concordant when the within
//! distance is strictly smaller and discordant when strictly larger.

use serde::{Deserialize, Serialize};

use crate::model::{DistanceMatrix, Partition};
use crate::{Error, Result};

use super::ClusterView;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    /// Concordant (within < between) comparisons.
    pub s_plus: u64,
    /// Discordant (within > between) comparisons.
    pub s_minus: u64,
    pub n_w: u64,
    pub n_b: u64,
    pub sum_within: f64,
    pub sum_between: f64,
    pub min_within: f64,
    pub max_within: f64,
    pub min_between: f64,
    pub max_between: f64,
}

pub(crate) struct PairDistances {
    pub within: Vec<f64>,
    /// Sorted ascending.
    pub between: Vec<f64>,
}

pub(crate) fn split_pair_distances(dist: &DistanceMatrix, view: &ClusterView) -> PairDistances {
    let core = &view.core;
    let mut cluster_of = vec![usize::MAX; dist.n()];
    for (c, members) in view.clusters.iter().enumerate() {
        for &i in members {
            cluster_of[i] = c;
        }
    }
    let mut within = Vec::new();
    let mut between = Vec::new();
    for a in 0..core.len() {
        for b in (a + 1)..core.len() {
            let (i, j) = (core[a], core[b]);
            if cluster_of[i] == cluster_of[j] {
                within.push(dist.get(i, j));
            } else {
                between.push(dist.get(i, j));
            }
        }
    }
    between.sort_by(f64::total_cmp);
    PairDistances { within, between }
}

/// Exact pair counts and distance sums/extremes over non-noise points.
pub fn pair_statistics(dist: &DistanceMatrix, partition: &Partition) -> Result<PairStatistics> {
    let view = ClusterView::new(partition);
    if view.k() < 2 {
        return Err(Error::IndexUndefined("pair statistics need k >= 2".into()));
    }
    Ok(pair_statistics_view(dist, &view))
}

pub(crate) fn pair_statistics_view(dist: &DistanceMatrix, view: &ClusterView) -> PairStatistics {
    let pd = split_pair_distances(dist, view);
    let (mut s_plus, mut s_minus) = (0u64, 0u64);
    for &w in &pd.within {
        // Between distances are sorted: count strict inequalities by rank.
        let below = pd.between.partition_point(|&b| b < w) as u64;
        let not_above = pd.between.partition_point(|&b| b <= w) as u64;
        s_minus += below;
        s_plus += pd.between.len() as u64 - not_above;
    }
    let fold = |v: &[f64]| {
        let sum: f64 = v.iter().sum();
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (sum, min, max)
    };
    let (sum_within, min_within, max_within) = fold(&pd.within);
    let (sum_between, min_between, max_between) = fold(&pd.between);
    PairStatistics {
        s_plus,
        s_minus,
        n_w: pd.within.len() as u64,
        n_b: pd.between.len() as u64,
        sum_within,
        sum_between,
        min_within,
        max_within,
        min_between,
        max_between,
    }
}

/// Area under the ROC curve with co-membership as the positive class and
/// decreasing distance as the score; ties contribute half.
pub fn aucc(dist: &DistanceMatrix, partition: &Partition) -> Result<f64> {
    let view = ClusterView::new(partition);
    if view.k() < 2 {
        return Err(Error::IndexUndefined("aucc needs k >= 2".into()));
    }
    let v = aucc_view(dist, &view);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::IndexUndefined("aucc needs within and between pairs".into()))
    }
}

pub(crate) fn aucc_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let pd = split_pair_distances(dist, view);
    let n_w = pd.within.len() as f64;
    let n_b = pd.between.len() as f64;
    if n_w == 0.0 || n_b == 0.0 {
        return f64::NAN;
    }
    let mut favorable = 0.0;
    for &w in &pd.within {
        let below = pd.between.partition_point(|&b| b < w) as f64;
        let not_above = pd.between.partition_point(|&b| b <= w) as f64;
        let ties = not_above - below;
        favorable += pd.between.len() as f64 - not_above + 0.5 * ties;
    }
    favorable / (n_w * n_b)
}

pub(crate) fn c_index_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let pd = split_pair_distances(dist, view);
    let n_w = pd.within.len();
    if n_w == 0 {
        return f64::NAN;
    }
    let mut all: Vec<f64> = pd.within.iter().chain(pd.between.iter()).copied().collect();
    all.sort_by(f64::total_cmp);
    let s: f64 = pd.within.iter().sum();
    let s_min: f64 = all[..n_w].iter().sum();
    let s_max: f64 = all[all.len() - n_w..].iter().sum();
    (s - s_min) / (s_max - s_min)
}

pub(crate) fn point_biserial_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let st = pair_statistics_view(dist, view);
    let n_w = st.n_w as f64;
    let n_b = st.n_b as f64;
    let n_t = n_w + n_b;
    if n_w == 0.0 || n_b == 0.0 {
        return f64::NAN;
    }
    let mean_w = st.sum_within / n_w;
    let mean_b = st.sum_between / n_b;
    // Population standard deviation over all pairwise distances.
    let pd = split_pair_distances(dist, view);
    let mean_all = (st.sum_within + st.sum_between) / n_t;
    let var: f64 = pd
        .within
        .iter()
        .chain(pd.between.iter())
        .map(|d| (d - mean_all) * (d - mean_all))
        .sum::<f64>()
        / n_t;
    (mean_b - mean_w) * (n_w * n_b / (n_t * n_t)).sqrt() / var.sqrt()
}

pub(crate) fn g_plus_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let st = pair_statistics_view(dist, view);
    let n_t = (st.n_w + st.n_b) as f64;
    2.0 * st.s_minus as f64 / (n_t * (n_t - 1.0))
}

pub(crate) fn tau_view(dist: &DistanceMatrix, view: &ClusterView) -> f64 {
    let st = pair_statistics_view(dist, view);
    let n_w = st.n_w as f64;
    let n_b = st.n_b as f64;
    let n_t = n_w + n_b;
    let denom = (n_w * n_b * (n_t * (n_t - 1.0) / 2.0)).sqrt();
    (st.s_plus as f64 - st.s_minus as f64) / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::internal::tests::toy_dataset;
    use crate::model::compute_distance_matrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn toy_pair_counts() {
        let (_, dist, p) = toy_dataset();
        let st = pair_statistics(&dist, &p).unwrap();
        assert_eq!(st.n_w, 2);
        assert_eq!(st.n_b, 4);
        assert_eq!(st.n_w + st.n_b, 6, "pair count identity for N' = 4");
        assert_eq!(st.sum_within, 2.0, "within distances {{1, 1}}");
        assert_eq!(st.sum_between, 40.0, "between distances {{10, 11, 9, 10}}");
        // Brute-force enumeration of all (within, between) comparisons.
        assert_eq!(st.s_plus, 8);
        assert_eq!(st.s_minus, 0);
    }

    #[test]
    fn equal_distances_have_no_strict_comparisons() {
        // Regular tetrahedron: all six pairwise distances are equal.
        let pts = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ];
        let dist = compute_distance_matrix(&pts).unwrap();
        let p = crate::model::Partition::new(vec![0, 0, 1, 1], "p").unwrap();
        let st = pair_statistics(&dist, &p).unwrap();
        assert_eq!(st.s_plus, 0);
        assert_eq!(st.s_minus, 0);
    }

    #[test]
    fn aucc_is_one_when_separated() {
        let (_, dist, p) = toy_dataset();
        assert_eq!(aucc(&dist, &p).unwrap(), 1.0);
    }

    #[test]
    fn aucc_matches_brute_force_roc() {
        let (_, dist, _) = toy_dataset();
        let p = crate::model::Partition::new(vec![0, 1, 0, 1], "cross").unwrap();
        // Oracle over the 6 pairs: count (within, between) wins plus half ties.
        let view = ClusterView::new(&p);
        let pd = split_pair_distances(&dist, &view);
        let mut favorable = 0.0;
        for &w in &pd.within {
            for &b in &pd.between {
                if w < b {
                    favorable += 1.0;
                } else if w == b {
                    favorable += 0.5;
                }
            }
        }
        let oracle = favorable / (pd.within.len() * pd.between.len()) as f64;
        assert_abs_diff_eq!(aucc(&dist, &p).unwrap(), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn aucc_equals_gamma_transform_without_ties() {
        let (_, dist, p) = toy_dataset();
        let st = pair_statistics(&dist, &p).unwrap();
        let gamma =
            (st.s_plus as f64 - st.s_minus as f64) / (st.s_plus as f64 + st.s_minus as f64);
        assert_abs_diff_eq!(aucc(&dist, &p).unwrap(), (gamma + 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn c_index_zero_at_optimal_within_sum() {
        let (_, dist, p) = toy_dataset();
        let view = ClusterView::new(&p);
        // S = 2 equals S_min = 2; S_max = 11 + 10 = 21.
        assert_abs_diff_eq!(c_index_view(&dist, &view), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn point_biserial_matches_hand_formula() {
        let (_, dist, p) = toy_dataset();
        let view = ClusterView::new(&p);
        // Distances {1,1,9,10,10,11}: mean_w = 1, mean_b = 10, mean = 7,
        // population variance = 110/6.
        let sd = (110.0f64 / 6.0).sqrt();
        let expected = (10.0 - 1.0) * (8.0f64 / 36.0).sqrt() / sd;
        assert_abs_diff_eq!(point_biserial_view(&dist, &view), expected, epsilon = 1e-12);
    }

    #[test]
    fn g_plus_and_tau_hand_values() {
        let (_, dist, p) = toy_dataset();
        let view = ClusterView::new(&p);
        assert_abs_diff_eq!(g_plus_view(&dist, &view), 0.0, epsilon = 1e-15);
        let expected_tau = 8.0 / (2.0f64 * 4.0 * 15.0).sqrt();
        assert_abs_diff_eq!(tau_view(&dist, &view), expected_tau, epsilon = 1e-12);
    }
}
