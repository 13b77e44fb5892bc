use serde::{Deserialize, Serialize};

use crate::model::{canonical_form, Dataset, Partition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageMethod {
    Single,
    Average,
    Complete,
    Ward,
}

impl LinkageMethod {
    pub fn name(self) -> &'static str {
        match self {
            LinkageMethod::Single => "single",
            LinkageMethod::Average => "average",
            LinkageMethod::Complete => "complete",
            LinkageMethod::Ward => "ward",
        }
    }
}

/// One agglomeration step. Cluster ids follow the usual convention:
/// leaves are 0..n-1 and step s creates id n+s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Stepwise dendrogram: n-1 merges over n observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub method: LinkageMethod,
    pub merges: Vec<Merge>,
}

/// Agglomerative clustering via Lance-Williams updates. Merge ties break
/// on the lowest (a, b) cluster-id pair. Ward operates on squared
/// distances internally; reported heights are square roots.
pub fn run_agglomerative(dataset: &Dataset, method: LinkageMethod) -> Result<Dendrogram> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least 2 observations".into()));
    }
    let squared = method == LinkageMethod::Ward;
    // work[i][j]: dissimilarity between the clusters currently in slots i, j.
    let mut work = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for t in 0..dataset.dims() {
                let d = dataset.points[i][t] - dataset.points[j][t];
                s += d * d;
            }
            let d = if squared { s } else { s.sqrt() };
            work[i * n + j] = d;
            work[j * n + i] = d;
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    // Cached per-slot nearest neighbour (distance, slot).
    let mut nearest: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
    for i in 0..n {
        nearest[i] = scan_row(&work, &active, &ids, n, i);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // Global best pair by (distance, lo id, hi id).
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] || nearest[i].1 == usize::MAX {
                continue;
            }
            let (d, j) = nearest[i];
            let (lo, hi) = ordered(ids[i], ids[j]);
            let cand = (d, lo, hi, i, j);
            best = match best {
                None => Some(cand),
                Some(cur) => {
                    if (cand.0, cand.1, cand.2) < (cur.0, cur.1, cur.2) {
                        Some(cand)
                    } else {
                        Some(cur)
                    }
                }
            };
        }
        let (dist, lo, hi, si, sj) = best.expect("active pair must exist");
        let (dest, gone) = (si.min(sj), si.max(sj));
        let height = if squared { dist.sqrt() } else { dist };
        merges.push(Merge { a: lo, b: hi, height });

        // Lance-Williams update into `dest`.
        let (ni, nj) = (sizes[dest] as f64, sizes[gone] as f64);
        let dij = work[dest * n + gone];
        for x in 0..n {
            if !active[x] || x == dest || x == gone {
                continue;
            }
            let dxi = work[x * n + dest];
            let dxj = work[x * n + gone];
            let updated = match method {
                LinkageMethod::Single => 0.5 * dxi + 0.5 * dxj - 0.5 * (dxi - dxj).abs(),
                LinkageMethod::Complete => 0.5 * dxi + 0.5 * dxj + 0.5 * (dxi - dxj).abs(),
                LinkageMethod::Average => (ni * dxi + nj * dxj) / (ni + nj),
                LinkageMethod::Ward => {
                    let nx = sizes[x] as f64;
                    ((ni + nx) * dxi + (nj + nx) * dxj - nx * dij) / (ni + nj + nx)
                }
            };
            work[x * n + dest] = updated;
            work[dest * n + x] = updated;
        }
        active[gone] = false;
        sizes[dest] += sizes[gone];
        ids[dest] = n + step;

        // Refresh caches invalidated by the merge.
        nearest[dest] = scan_row(&work, &active, &ids, n, dest);
        for x in 0..n {
            if !active[x] || x == dest {
                continue;
            }
            if nearest[x].1 == dest || nearest[x].1 == gone {
                nearest[x] = scan_row(&work, &active, &ids, n, x);
            } else {
                let d = work[x * n + dest];
                if d < nearest[x].0 {
                    nearest[x] = (d, dest);
                }
            }
        }
    }
    Ok(Dendrogram { n, method, merges })
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn scan_row(
    work: &[f64],
    active: &[bool],
    ids: &[usize],
    n: usize,
    i: usize,
) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    let mut best_pair = (usize::MAX, usize::MAX);
    for j in 0..n {
        if j == i || !active[j] {
            continue;
        }
        let d = work[i * n + j];
        let pair = ordered(ids[i], ids[j]);
        if d < best.0 || (d == best.0 && pair < best_pair) {
            best = (d, j);
            best_pair = pair;
        }
    }
    best
}

/// Cuts the dendrogram so exactly `k` clusters remain; labels are in
/// first-appearance canonical form.
pub fn cut_at(dendrogram: &Dendrogram, k: usize, source: &str) -> Result<Partition> {
    let n = dendrogram.n;
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("cut k = {k} outside [1, {n}]")));
    }
    // Union-find over the first n-k merges.
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        let merged = n + step;
        parent[ra] = merged;
        parent[rb] = merged;
    }
    let labels: Vec<i32> = (0..n).map(|i| find(&mut parent, i) as i32).collect();
    Partition::new(canonical_form(&labels), source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PropertyTags;

    fn dataset(points: Vec<Vec<f64>>) -> Dataset {
        let n = points.len();
        let meta = PropertyTags {
            k_star: 1,
            dimensions: points[0].len(),
            overlap: 0.0,
            imbalance: 0.0,
            has_noise: false,
            compactness_level: None,
            distribution: None,
        };
        Dataset::new("t", points, vec![0; n], meta).unwrap()
    }

    /// Brute-force single linkage: at each step merge the two clusters
    /// with minimal pointwise minimum distance.
    fn single_linkage_oracle(points: &[Vec<f64>], k: usize) -> Vec<i32> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 1);
            for a in 0..clusters.len() {
                for b in (a + 1)..clusters.len() {
                    let mut d = f64::INFINITY;
                    for &i in &clusters[a] {
                        for &j in &clusters[b] {
                            let mut s = 0.0;
                            for t in 0..points[0].len() {
                                s += (points[i][t] - points[j][t]).powi(2);
                            }
                            d = d.min(s.sqrt());
                        }
                    }
                    if d < best.0 {
                        best = (d, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        let mut labels = vec![0i32; points.len()];
        for (c, members) in clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c as i32;
            }
        }
        canonical_form(&labels)
    }

    #[test]
    fn single_linkage_cut_matches_oracle() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let d = dataset(pts.clone());
        let dendro = run_agglomerative(&d, LinkageMethod::Single).unwrap();
        let p = cut_at(&dendro, 2, "single(k=2)").unwrap();
        assert_eq!(p.canonical(), vec![0, 0, 1, 1]);
        assert_eq!(p.canonical(), single_linkage_oracle(&pts, 2));
    }

    #[test]
    fn cut_at_n_gives_singletons() {
        let d = dataset(vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]]);
        for method in
            [LinkageMethod::Single, LinkageMethod::Average, LinkageMethod::Complete, LinkageMethod::Ward]
        {
            let dendro = run_agglomerative(&d, method).unwrap();
            let p = cut_at(&dendro, 4, "x").unwrap();
            assert_eq!(p.k, 4);
            for k in 1..=4 {
                assert_eq!(cut_at(&dendro, k, "x").unwrap().k, k);
            }
        }
    }

    #[test]
    fn single_linkage_heights_are_monotone() {
        let cfg = crate::datagen::GenConfig {
            k_star: 3,
            cluster_size_range: (15, 15),
            seed: 8,
            ..Default::default()
        };
        let d = crate::datagen::generate_dataset("mono", &cfg).unwrap();
        let dendro = run_agglomerative(&d, LinkageMethod::Single).unwrap();
        for w in dendro.merges.windows(2) {
            assert!(w[1].height >= w[0].height - 1e-12);
        }
    }

    /// Direct Ward criterion: merging A and B costs
    /// |A||B|/(|A|+|B|) * ||cA - cB||^2; the Lance-Williams recursion on
    /// squared distances carries 2x that, so height = sqrt(2 * delta).
    #[test]
    fn ward_heights_match_brute_force_criterion() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.2],
            vec![4.0, 4.1],
            vec![4.4, 3.9],
            vec![9.0, 0.3],
            vec![9.2, 0.1],
            vec![0.1, 6.0],
            vec![0.3, 6.4],
        ];
        let d = dataset(pts.clone());
        let dendro = run_agglomerative(&d, LinkageMethod::Ward).unwrap();

        // Greedy oracle recomputing the Ward cost from raw points.
        let mut clusters: Vec<Vec<usize>> = (0..pts.len()).map(|i| vec![i]).collect();
        for merge in &dendro.merges {
            let mut best = (f64::INFINITY, 0usize, 1usize);
            for a in 0..clusters.len() {
                for b in (a + 1)..clusters.len() {
                    let ca = centroid(&pts, &clusters[a]);
                    let cb = centroid(&pts, &clusters[b]);
                    let na = clusters[a].len() as f64;
                    let nb = clusters[b].len() as f64;
                    let gap: f64 =
                        ca.iter().zip(cb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                    let delta = na * nb / (na + nb) * gap;
                    if delta < best.0 {
                        best = (delta, a, b);
                    }
                }
            }
            assert!(
                (merge.height - (2.0 * best.0).sqrt()).abs() < 1e-9,
                "height {} vs oracle {}",
                merge.height,
                (2.0 * best.0).sqrt()
            );
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
    }

    fn centroid(pts: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
        let dims = pts[0].len();
        let mut c = vec![0.0; dims];
        for &i in members {
            for t in 0..dims {
                c[t] += pts[i][t];
            }
        }
        for v in c.iter_mut() {
            *v /= members.len() as f64;
        }
        c
    }

    #[test]
    fn hierarchical_cuts_nest() {
        let cfg = crate::datagen::GenConfig {
            k_star: 4,
            cluster_size_range: (10, 10),
            seed: 31,
            ..Default::default()
        };
        let d = crate::datagen::generate_dataset("nest", &cfg).unwrap();
        for method in
            [LinkageMethod::Single, LinkageMethod::Average, LinkageMethod::Complete, LinkageMethod::Ward]
        {
            let dendro = run_agglomerative(&d, method).unwrap();
            for k in 2..d.n() {
                let coarse = cut_at(&dendro, k, "c").unwrap();
                let fine = cut_at(&dendro, k + 1, "f").unwrap();
                // Refinement: points sharing a fine cluster share the coarse one.
                for i in 0..d.n() {
                    for j in 0..d.n() {
                        if fine.labels[i] == fine.labels[j] {
                            assert_eq!(coarse.labels[i], coarse.labels[j]);
                        }
                    }
                }
            }
        }
    }
}
