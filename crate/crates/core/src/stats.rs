//! Nonparametric statistics: Spearman correlation with significance,
//! pairwise Wilcoxon signed-rank with Bonferroni correction, and
//! Kruskal-Wallis tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::model::{average_ranks, Orientation};
use crate::{Error, Result};

/// Outcome of a single hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size (nonzero differences for Wilcoxon).
    pub n: usize,
    pub method: TestMethod,
    /// Bonferroni-adjusted p where applicable: min(1, p * m).
    pub adjusted_p: Option<f64>,
}

impl TestResult {
    pub fn significant_at(&self, alpha: f64) -> bool {
        self.adjusted_p.unwrap_or(self.p_value) < alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    SpearmanT,
    SpearmanExact,
    WilcoxonExact,
    WilcoxonNormal,
    KruskalWallis,
}

fn ascending_ranks(v: &[f64]) -> Result<Vec<f64>> {
    average_ranks(v, Orientation::Min)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation; `None` when either side is constant after
/// ranking. Use [`spearman`] when a p-value is needed.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Empty);
    }
    Ok(pearson(&ascending_ranks(x)?, &ascending_ranks(y)?))
}

/// Spearman correlation with a two-sided p-value: a t approximation for
/// n >= 10, exact permutation enumeration below that.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidConfig("spearman needs at least 3 observations".into()));
    }
    let rx = ascending_ranks(x)?;
    let ry = ascending_ranks(y)?;
    let rho = pearson(&rx, &ry)
        .ok_or_else(|| Error::Degenerate("constant vector: correlation undefined".into()))?;

    if n >= 10 {
        let denom = 1.0 - rho * rho;
        let p = if denom <= f64::EPSILON {
            0.0
        } else {
            let t = rho * ((n as f64 - 2.0) / denom).sqrt();
            let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0).expect("valid dof");
            2.0 * (1.0 - dist.cdf(t.abs()))
        };
        Ok(TestResult {
            statistic: rho,
            p_value: p.clamp(0.0, 1.0),
            n,
            method: TestMethod::SpearmanT,
            adjusted_p: None,
        })
    } else {
        let p = spearman_permutation_p(&rx, &ry, rho);
        Ok(TestResult {
            statistic: rho,
            p_value: p,
            n,
            method: TestMethod::SpearmanExact,
            adjusted_p: None,
        })
    }
}

/// Two-sided exact permutation p: fraction of permutations of `ry` with
/// |rho| >= |observed|.
fn spearman_permutation_p(rx: &[f64], ry: &[f64], observed: f64) -> f64 {
    let n = ry.len();
    let mut perm: Vec<f64> = ry.to_vec();
    let mut counts = (0u64, 0u64); // (extreme, total)
    let target = observed.abs() - 1e-12;
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let mut tally = |p: &[f64]| {
        counts.1 += 1;
        if let Some(r) = pearson(rx, p) {
            if r.abs() >= target {
                counts.0 += 1;
            }
        }
    };
    tally(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            tally(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    counts.0 as f64 / counts.1 as f64
}

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped; all-zero input yields p = 1 by convention. Exact enumeration
/// for fewer than 20 nonzero differences, normal approximation with
/// continuity correction otherwise.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n: 0,
            method: TestMethod::WilcoxonExact,
            adjusted_p: None,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = ascending_ranks(&abs)?;
    let w_plus: f64 =
        diffs.iter().zip(ranks.iter()).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    if n < 20 {
        let p = wilcoxon_exact_p(&ranks, w_plus);
        Ok(TestResult {
            statistic: w_plus,
            p_value: p,
            n,
            method: TestMethod::WilcoxonExact,
            adjusted_p: None,
        })
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_counts(&abs).iter().map(|&t| {
            let t = t as f64;
            t * t * t - t
        }).sum::<f64>();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = if var <= 0.0 {
            0.0
        } else {
            ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt()
        };
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let p = 2.0 * (1.0 - normal.cdf(z));
        Ok(TestResult {
            statistic: w_plus,
            p_value: p.clamp(0.0, 1.0),
            n,
            method: TestMethod::WilcoxonNormal,
            adjusted_p: None,
        })
    }
}

/// Exact two-sided p over all 2^n sign assignments of the ranked
/// differences.
fn wilcoxon_exact_p(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len();
    let total = 1u64 << n;
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0..total {
        let mut w = 0.0;
        for (i, r) in ranks.iter().enumerate() {
            if mask & (1 << i) != 0 {
                w += r;
            }
        }
        if w <= w_obs + 1e-12 {
            le += 1;
        }
        if w >= w_obs - 1e-12 {
            ge += 1;
        }
    }
    let tail = le.min(ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

fn tie_counts(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            out.push(j - i);
        }
        i = j;
    }
    out
}

/// Pairwise Wilcoxon over the columns of a paired sample matrix, with
/// Bonferroni correction by the number of pairs.
pub fn wilcoxon_pairwise(samples: &[Vec<f64>]) -> Result<Vec<(usize, usize, TestResult)>> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InvalidConfig("need at least 2 samples".into()));
    }
    let len = samples[0].len();
    for s in samples {
        if s.len() != len {
            return Err(Error::LengthMismatch { left: len, right: s.len() });
        }
    }
    let m = (k * (k - 1) / 2) as f64;
    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut r = wilcoxon_signed_rank(&samples[i], &samples[j])?;
            r.adjusted_p = Some((r.p_value * m).min(1.0));
            out.push((i, j, r));
        }
    }
    Ok(out)
}

/// Kruskal-Wallis H test with tie correction; chi-square p-value with
/// groups-1 degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidConfig("need >= 2 nonempty groups".into()));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len();
    let ranks = ascending_ranks(&all)?;
    let nf = n as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for g in groups {
        let ni = g.len() as f64;
        let ri: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += ri * ri / ni;
        offset += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    let tie_term: f64 = tie_counts(&all)
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - tie_term / (nf * nf * nf - nf);
    if correction > 0.0 {
        h /= correction;
    }
    let df = groups.len() as f64 - 1.0;
    let p = if h <= 0.0 {
        1.0
    } else {
        let chi = ChiSquared::new(df).expect("valid dof");
        1.0 - chi.cdf(h)
    };
    Ok(TestResult {
        statistic: h,
        p_value: p.clamp(0.0, 1.0),
        n,
        method: TestMethod::KruskalWallis,
        adjusted_p: None,
    })
}

/// Dataset property whose effect on index performance is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKey {
    KStar,
    Dimensions,
    Overlap,
    Imbalance,
    Noise,
    Compactness,
}

impl PropertyKey {
    pub fn all() -> [PropertyKey; 6] {
        [
            PropertyKey::KStar,
            PropertyKey::Dimensions,
            PropertyKey::Overlap,
            PropertyKey::Imbalance,
            PropertyKey::Noise,
            PropertyKey::Compactness,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyKey::KStar => "k_star",
            PropertyKey::Dimensions => "dimensions",
            PropertyKey::Overlap => "overlap",
            PropertyKey::Imbalance => "imbalance",
            PropertyKey::Noise => "noise",
            PropertyKey::Compactness => "compactness",
        }
    }
}

/// Association between a dataset property and per-record performance
/// (rho_all), per index. Numeric properties use Spearman correlation;
/// noise and the two fixed compactness levels use Kruskal-Wallis.
/// Returns (index, result) pairs; indexes without enough data are absent.
pub fn property_association(
    records: &[crate::evaluation::EvaluationRecord],
    property: PropertyKey,
) -> Vec<(String, TestResult)> {
    let mut indexes: Vec<&str> = records.iter().map(|r| r.index.as_str()).collect();
    indexes.sort_unstable();
    indexes.dedup();
    let mut out = Vec::new();
    for index in indexes {
        let rows: Vec<_> =
            records.iter().filter(|r| r.index == index && r.rho_all.is_some()).collect();
        let result = match property {
            PropertyKey::KStar
            | PropertyKey::Dimensions
            | PropertyKey::Overlap
            | PropertyKey::Imbalance => {
                let x: Vec<f64> = rows
                    .iter()
                    .map(|r| match property {
                        PropertyKey::KStar => r.tags.k_star as f64,
                        PropertyKey::Dimensions => r.tags.dimensions as f64,
                        PropertyKey::Overlap => r.tags.overlap,
                        PropertyKey::Imbalance => r.tags.imbalance,
                        _ => unreachable!(),
                    })
                    .collect();
                let y: Vec<f64> = rows.iter().map(|r| r.rho_all.unwrap()).collect();
                if x.len() < 3 {
                    continue;
                }
                spearman(&x, &y)
            }
            PropertyKey::Noise => {
                let yes: Vec<f64> =
                    rows.iter().filter(|r| r.tags.has_noise).map(|r| r.rho_all.unwrap()).collect();
                let no: Vec<f64> =
                    rows.iter().filter(|r| !r.tags.has_noise).map(|r| r.rho_all.unwrap()).collect();
                if yes.is_empty() || no.is_empty() {
                    continue;
                }
                kruskal_wallis(&[yes, no])
            }
            PropertyKey::Compactness => {
                use crate::model::CompactnessLevel;
                let level = |r: &&crate::evaluation::EvaluationRecord| r.tags.compactness_level;
                let compact: Vec<f64> = rows
                    .iter()
                    .filter(|r| level(r) == Some(CompactnessLevel::Compact))
                    .map(|r| r.rho_all.unwrap())
                    .collect();
                let sparse: Vec<f64> = rows
                    .iter()
                    .filter(|r| level(r) == Some(CompactnessLevel::Sparse))
                    .map(|r| r.rho_all.unwrap())
                    .collect();
                if compact.is_empty() || sparse.is_empty() {
                    continue;
                }
                kruskal_wallis(&[compact, sparse])
            }
        };
        if let Ok(r) = result {
            out.push((index.to_string(), r));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spearman_perfect_agreement() {
        let r = spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spearman_perfect_reversal() {
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn spearman_tied_example() {
        // Hand oracle: ranks [1, 2.5, 2.5, 4] vs [1, 3, 2, 4], Pearson = 4.5/sqrt(22.5).
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 4.5 / 22.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.method, TestMethod::SpearmanExact);
    }

    #[test]
    fn spearman_constant_is_undefined() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert_eq!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn spearman_exact_p_matches_enumeration() {
        // Independent enumeration over all 4! = 24 permutations.
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        let r = spearman(&x, &y).unwrap();
        let perms: Vec<Vec<f64>> = permutations(&[1.0, 2.0, 3.0, 4.0]);
        let rho_obs = r.statistic.abs();
        let extreme = perms
            .iter()
            .filter(|p| {
                let rho = spearman_rho(&x, p).unwrap().unwrap();
                rho.abs() >= rho_obs - 1e-12
            })
            .count();
        assert_abs_diff_eq!(r.p_value, extreme as f64 / 24.0, epsilon = 1e-12);
    }

    fn permutations(v: &[f64]) -> Vec<Vec<f64>> {
        if v.len() <= 1 {
            return vec![v.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..v.len() {
            let mut rest: Vec<f64> = v.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n, 0);
    }

    #[test]
    fn wilcoxon_large_shift_is_significant() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.p_value < 0.05, "p = {}", r.p_value);
        assert_eq!(r.method, TestMethod::WilcoxonNormal);
    }

    #[test]
    fn wilcoxon_exact_matches_sign_enumeration_n8() {
        let a = [1.2, 0.4, 2.2, 3.1, 0.9, 1.8, 2.5, 0.3];
        let b = [0.8, 0.9, 1.5, 2.0, 1.4, 1.1, 1.9, 0.6];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonExact);
        assert_eq!(r.n, 8);

        // Independent oracle over all 2^8 sign assignments.
        let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let ranks = average_ranks(&abs, Orientation::Min).unwrap();
        let w_obs: f64 = diffs
            .iter()
            .zip(ranks.iter())
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| *r)
            .sum();
        let mut le = 0u32;
        let mut ge = 0u32;
        for mask in 0u32..256 {
            let w: f64 = (0..8).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if w <= w_obs + 1e-12 {
                le += 1;
            }
            if w >= w_obs - 1e-12 {
                ge += 1;
            }
        }
        let expect = (2.0 * (le.min(ge) as f64) / 256.0).min(1.0);
        assert_abs_diff_eq!(r.p_value, expect, epsilon = 1e-12);
    }

    #[test]
    fn kruskal_identical_groups() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kruskal_complete_separation() {
        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![101.0, 102.0, 103.0]]).unwrap();
        assert!(r.p_value < 0.05, "p = {}", r.p_value);
        // Maximal H for two groups of 3: ranks {1,2,3} vs {4,5,6}.
        let expected = 12.0 / (6.0 * 7.0) * (36.0 / 3.0 + 225.0 / 3.0) - 3.0 * 7.0;
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-12);
    }

    #[test]
    fn kruskal_matches_rank_sum_oracle() {
        let groups = vec![vec![2.1, 5.0, 1.1], vec![3.3, 0.7], vec![9.0, 4.4, 6.6, 2.8]];
        let r = kruskal_wallis(&groups).unwrap();
        // Direct rank-sum formula, no ties in this sample.
        let all: Vec<f64> = groups.iter().flatten().copied().collect();
        let ranks = average_ranks(&all, Orientation::Min).unwrap();
        let n = all.len() as f64;
        let mut h = 0.0;
        let mut off = 0;
        for g in &groups {
            let ri: f64 = ranks[off..off + g.len()].iter().sum();
            h += ri * ri / g.len() as f64;
            off += g.len();
        }
        h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
        assert_abs_diff_eq!(r.statistic, h, epsilon = 1e-12);
    }

    #[test]
    fn property_association_detects_rigged_dependence() {
        use crate::evaluation::EvaluationRecord;
        use crate::model::PropertyTags;
        // rho_all rigged to equal the overlap value exactly.
        let records: Vec<EvaluationRecord> = (0..12)
            .map(|i| {
                let overlap = i as f64 / 20.0;
                EvaluationRecord {
                    dataset: format!("d{i}"),
                    source: "a".into(),
                    variant: String::new(),
                    index: "probe".into(),
                    top_pick_hit: true,
                    rho_all: Some(overlap),
                    rho_under: None,
                    rho_over: None,
                    range: Some(0.0),
                    tags: PropertyTags {
                        k_star: 4,
                        dimensions: 2,
                        overlap,
                        imbalance: 0.0,
                        has_noise: i % 2 == 0,
                        compactness_level: None,
                        distribution: None,
                    },
                }
            })
            .collect();
        let results = property_association(&records, PropertyKey::Overlap);
        assert_eq!(results.len(), 1);
        let (index, r) = &results[0];
        assert_eq!(index, "probe");
        assert_abs_diff_eq!(r.statistic, 1.0, epsilon = 1e-12);
        assert!(r.p_value < 0.05);
        // Constant property: correlation undefined, entry absent.
        assert!(property_association(&records, PropertyKey::Imbalance).is_empty());
    }

    #[test]
    fn bonferroni_never_decreases_p() {
        let samples = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 2.2],
            vec![1.1, 2.3, 2.9, 4.4, 5.2, 6.0, 2.0],
            vec![0.5, 1.2, 2.2, 3.1, 4.0, 5.5, 1.5],
        ];
        for (_, _, r) in wilcoxon_pairwise(&samples).unwrap() {
            assert!(r.adjusted_p.unwrap() >= r.p_value);
            assert!(r.adjusted_p.unwrap() <= 1.0);
        }
    }
}
