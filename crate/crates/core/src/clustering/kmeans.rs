use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Dataset, Partition};
use crate::{Error, Result};

/// Lloyd's algorithm from k-means++ style probabilistic seeding, run to an
/// assignment fixpoint or 300 iterations. Deterministic given the seed.
pub fn run_kmeans(dataset: &Dataset, k: usize, seed: u64) -> Result<Partition> {
    let run = kmeans_run(&dataset.points, k, seed)?;
    Partition::new(run.labels, format!("kmeans(k={k})"))
}

pub(crate) struct KMeansRun {
    pub labels: Vec<i32>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
}

const MAX_ITERS: usize = 300;

pub(crate) fn kmeans_run(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansRun> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} outside [1, {n}]")));
    }
    let dims = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();

    for _ in 0..MAX_ITERS {
        let mut next = vec![usize::MAX; n];
        for (i, p) in points.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best {
                    best = d;
                    arg = c;
                }
            }
            next[i] = arg;
        }
        repair_empty_clusters(points, &centers, &mut next, k);
        trace.push(objective(points, &centers, &next));
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
        centers = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for t in 0..dims {
                centers[labels[i]][t] += p[t];
            }
        }
        for c in 0..k {
            for t in 0..dims {
                centers[c][t] /= counts[c] as f64;
            }
        }
    }
    Ok(KMeansRun { labels: labels.into_iter().map(|l| l as i32).collect(), objective_trace: trace })
}

/// First center uniform, each next center drawn with probability
/// proportional to squared distance from the nearest chosen center.
fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    centers.push(points[first].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // All remaining points coincide with a center; pick any unchosen.
            match (0..n).find(|&i| !chosen[i]) {
                Some(i) => i,
                None => break,
            }
        };
        chosen[idx] = true;
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centers.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    // Degenerate duplicates: fewer distinct points than k.
    while centers.len() < k {
        centers.push(centers[0].clone());
    }
    centers
}

/// Each empty cluster captures the point currently farthest from its own
/// centroid, excluding points that are sole members of their cluster.
fn repair_empty_clusters(
    points: &[Vec<f64>],
    centers: &[Vec<f64>],
    labels: &mut [usize],
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = (0..k).find(|&c| counts[c] == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] <= 1 {
                continue;
            }
            let d = sq_dist(p, &centers[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

fn objective(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    // WCSS against the centroids implied by the assignment.
    let k = centers.len();
    let dims = points[0].len();
    let mut sums = vec![vec![0.0; dims]; k];
    let mut counts = vec![0usize; k];
    for (i, p) in points.iter().enumerate() {
        counts[labels[i]] += 1;
        for t in 0..dims {
            sums[labels[i]][t] += p[t];
        }
    }
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let c = labels[i];
        for t in 0..dims {
            let mean = sums[c][t] / counts[c] as f64;
            total += (p[t] - mean) * (p[t] - mean);
        }
    }
    total
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}
