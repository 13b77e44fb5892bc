use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense symmetric matrix of pairwise Euclidean distances, zero diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// Computes the full pairwise Euclidean distance matrix.
pub fn compute_distance_matrix(points: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least 2 points".into()));
    }
    for (row, p) in points.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row });
        }
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = euclidean(&points[i], &points[j]);
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    Ok(DistanceMatrix { n, d })
}
