//! External validity indexes against a ground truth, and the aggregated
//! external ranking used as the evaluation reference.
//!
//! Noise convention: observations labeled noise by BOTH sides are dropped;
//! any remaining noise label (on either side) counts as a singleton
//! cluster of its own. The convention is symmetric in the two labelings.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::model::{average_ranks, Label, Orientation, Partition, NOISE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalIndex {
    Jaccard,
    SokalSneath3,
    Ari,
    Nmi,
    Nid,
}

impl ExternalIndex {
    pub fn all() -> [ExternalIndex; 5] {
        [
            ExternalIndex::Jaccard,
            ExternalIndex::SokalSneath3,
            ExternalIndex::Ari,
            ExternalIndex::Nmi,
            ExternalIndex::Nid,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ExternalIndex::Jaccard => "jaccard",
            ExternalIndex::SokalSneath3 => "ss3",
            ExternalIndex::Ari => "ari",
            ExternalIndex::Nmi => "nmi",
            ExternalIndex::Nid => "nid",
        }
    }
}

/// Counts over unordered point pairs: co-clustered in both (n11), in the
/// first only (n10), in the second only (n01), in neither (n00).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

/// Contingency table between two labelings.
#[derive(Debug, Clone)]
pub struct ContingencyTable {
    pub counts: BTreeMap<(i64, i64), u64>,
    pub row_marginals: BTreeMap<i64, u64>,
    pub col_marginals: BTreeMap<i64, u64>,
    pub n: u64,
}

/// Applies the noise convention and returns comparable label vectors.
fn prepare(a: &[Label], b: &[Label]) -> Result<(Vec<i64>, Vec<i64>)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    // Fresh singleton ids sit above any real label.
    let mut next_a: i64 = i64::from(i32::MAX) + 1;
    let mut next_b: i64 = i64::from(i32::MAX) + 1;
    for i in 0..a.len() {
        if a[i] == NOISE && b[i] == NOISE {
            continue;
        }
        if a[i] == NOISE {
            out_a.push(next_a);
            next_a += 1;
        } else {
            out_a.push(i64::from(a[i]));
        }
        if b[i] == NOISE {
            out_b.push(next_b);
            next_b += 1;
        } else {
            out_b.push(i64::from(b[i]));
        }
    }
    if out_a.is_empty() {
        return Err(Error::Degenerate("no comparable observations".into()));
    }
    Ok((out_a, out_b))
}

/// Exact pair counts between two labelings.
pub fn pair_counts(truth: &[Label], candidate: &[Label]) -> Result<PairCounts> {
    let (a, b) = prepare(truth, candidate)?;
    let mut c = PairCounts { n11: 0, n10: 0, n01: 0, n00: 0 };
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let same_a = a[i] == a[j];
            let same_b = b[i] == b[j];
            match (same_a, same_b) {
                (true, true) => c.n11 += 1,
                (true, false) => c.n10 += 1,
                (false, true) => c.n01 += 1,
                (false, false) => c.n00 += 1,
            }
        }
    }
    Ok(c)
}

pub fn contingency(truth: &[Label], candidate: &[Label]) -> Result<ContingencyTable> {
    let (a, b) = prepare(truth, candidate)?;
    let mut counts: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut row: BTreeMap<i64, u64> = BTreeMap::new();
    let mut col: BTreeMap<i64, u64> = BTreeMap::new();
    for i in 0..a.len() {
        *counts.entry((a[i], b[i])).or_insert(0) += 1;
        *row.entry(a[i]).or_insert(0) += 1;
        *col.entry(b[i]).or_insert(0) += 1;
    }
    Ok(ContingencyTable { counts, row_marginals: row, col_marginals: col, n: a.len() as u64 })
}

fn choose2(x: u64) -> f64 {
    x as f64 * (x as f64 - 1.0) / 2.0
}

/// Raw score of one external index. NID is a distance (0 = identical);
/// the other four are similarities (1 = identical).
pub fn external_score(index: ExternalIndex, truth: &[Label], candidate: &[Label]) -> Result<f64> {
    match index {
        ExternalIndex::Jaccard => {
            let c = pair_counts(truth, candidate)?;
            let denom = c.n11 + c.n10 + c.n01;
            Ok(if denom == 0 { 1.0 } else { c.n11 as f64 / denom as f64 })
        }
        ExternalIndex::SokalSneath3 => {
            let c = pair_counts(truth, candidate)?;
            let denom = marginal_product(&c);
            if denom == 0.0 {
                // Degenerate marginals: identical iff no disagreeing pair.
                Ok(if c.n10 == 0 && c.n01 == 0 { 1.0 } else { 0.0 })
            } else {
                Ok((c.n11 as f64 * c.n00 as f64) / denom.sqrt())
            }
        }
        ExternalIndex::Ari => {
            let t = contingency(truth, candidate)?;
            let sum_cells: f64 = t.counts.values().map(|&v| choose2(v)).sum();
            let sum_rows: f64 = t.row_marginals.values().map(|&v| choose2(v)).sum();
            let sum_cols: f64 = t.col_marginals.values().map(|&v| choose2(v)).sum();
            let expected = sum_rows * sum_cols / choose2(t.n);
            let max = 0.5 * (sum_rows + sum_cols);
            if (max - expected).abs() < 1e-12 {
                // Both sides trivially concentrated; identical labelings get 1.
                Ok(if (sum_cells - max).abs() < 1e-12 { 1.0 } else { 0.0 })
            } else {
                Ok((sum_cells - expected) / (max - expected))
            }
        }
        ExternalIndex::Nmi => {
            let t = contingency(truth, candidate)?;
            let (i, ha, hb) = mutual_information(&t);
            if ha == 0.0 && hb == 0.0 {
                return Ok(1.0); // both a single cluster
            }
            if ha == 0.0 || hb == 0.0 {
                return Ok(0.0);
            }
            Ok(i / (ha * hb).sqrt())
        }
        ExternalIndex::Nid => {
            let t = contingency(truth, candidate)?;
            let (i, ha, hb) = mutual_information(&t);
            let max_h = ha.max(hb);
            if max_h == 0.0 {
                return Ok(0.0); // both a single cluster: identical
            }
            Ok(1.0 - i / max_h)
        }
    }
}

fn marginal_product(c: &PairCounts) -> f64 {
    let a = c.n11 as f64;
    let b = c.n10 as f64;
    let cc = c.n01 as f64;
    let d = c.n00 as f64;
    (a + b) * (a + cc) * (d + b) * (d + cc)
}

/// Returns (I(A;B), H(A), H(B)) in nats.
fn mutual_information(t: &ContingencyTable) -> (f64, f64, f64) {
    let n = t.n as f64;
    let entropy = |m: &BTreeMap<i64, u64>| {
        -m.values()
            .map(|&v| {
                let p = v as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let ha = entropy(&t.row_marginals);
    let hb = entropy(&t.col_marginals);
    let mut i = 0.0;
    for (&(r, c), &v) in &t.counts {
        let pij = v as f64 / n;
        let pi = t.row_marginals[&r] as f64 / n;
        let pj = t.col_marginals[&c] as f64 / n;
        i += pij * (pij / (pi * pj)).ln();
    }
    (i.max(0.0), ha, hb)
}

/// Max-is-better version of a score: identity except NID -> 1 - NID.
pub fn similarity(index: ExternalIndex, truth: &[Label], candidate: &[Label]) -> Result<f64> {
    let s = external_score(index, truth, candidate)?;
    Ok(match index {
        ExternalIndex::Nid => 1.0 - s,
        _ => s,
    })
}

/// External scores of a partition collection plus the aggregated
/// reference ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalEvaluation {
    /// `scores[p][i]`: raw score of index i on partition p.
    pub scores: Vec<Vec<f64>>,
    /// Aggregated rank per partition, 1 = best, ties averaged.
    pub aggregated_ranks: Vec<f64>,
}

/// Scores every partition against the truth with all five indexes, ranks
/// each index column (max is better), sums the ranks and re-ranks the
/// sums. The rank-1 partition is the reference "Top Pick".
pub fn evaluate_collection(
    truth: &[Label],
    partitions: &[Partition],
) -> Result<ExternalEvaluation> {
    if partitions.len() < 2 {
        return Err(Error::InvalidConfig("need at least 2 partitions to rank".into()));
    }
    let indexes = ExternalIndex::all();
    let mut scores = Vec::with_capacity(partitions.len());
    let mut sims = vec![Vec::with_capacity(partitions.len()); indexes.len()];
    for p in partitions {
        let mut row = Vec::with_capacity(indexes.len());
        for (ix, &index) in indexes.iter().enumerate() {
            let raw = external_score(index, truth, &p.labels)?;
            let sim = if index == ExternalIndex::Nid { 1.0 - raw } else { raw };
            sims[ix].push(sim);
            row.push(raw);
        }
        scores.push(row);
    }
    let aggregated_ranks = aggregate_external_ranks(&sims)?;
    Ok(ExternalEvaluation { scores, aggregated_ranks })
}

/// Sum-of-ranks aggregation of per-index similarity columns (max is
/// better); returns the re-ranked sums, 1 = best.
pub fn aggregate_external_ranks(similarities: &[Vec<f64>]) -> Result<Vec<f64>> {
    if similarities.is_empty() || similarities[0].is_empty() {
        return Err(Error::Empty);
    }
    let n = similarities[0].len();
    let mut summed = vec![0.0; n];
    for column in similarities {
        if column.len() != n {
            return Err(Error::LengthMismatch { left: n, right: column.len() });
        }
        let ranks = average_ranks(column, Orientation::Max)?;
        for (p, r) in ranks.into_iter().enumerate() {
            summed[p] += r;
        }
    }
    average_ranks(&summed, Orientation::Min)
}
