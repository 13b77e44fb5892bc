//! File formats shared across pipeline stages.
//!
//! * dataset: CSV with feature columns `f0..f{D-1}` then a `label`
//!   column, noise encoded as `-1`;
//! * partitions: JSON array of `{source, labels}` records;
//! * ranked sets: JSON with partitions plus `reference_ranks`;
//! * scores, records, summaries: CSV with a header row.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::datagen::{measure_imbalance, measure_overlap, GenConfig};
use crate::evaluation::{EvaluationRecord, RejectRecord, SummaryRow};
use crate::model::{Dataset, Label, Partition, PropertyTags, NOISE};
use crate::supervised::{RankedPartitionSet, Variant};
use crate::{Error, Result};

fn missing(path: &Path) -> Error {
    Error::MissingArtifact(path.display().to_string())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|_| missing(path))
}

/// Writes a dataset as CSV: f0..f{D-1}, label.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dims = dataset.dims();
    let mut header: Vec<String> = (0..dims).map(|t| format!("f{t}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut row: Vec<String> =
            dataset.points[i].iter().map(|v| format!("{v:?}")).collect();
        row.push(dataset.truth.labels[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV. Property tags are re-measured from the data;
/// generation-only tags (compactness, distribution) come from `tags`
/// when available.
pub fn read_dataset_csv(path: &Path, id: &str, tags: Option<&PropertyTags>) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let headers = r.headers()?.clone();
    let dims = headers.len().saturating_sub(1);
    if dims == 0 || headers.get(dims) != Some("label") {
        return Err(Error::MalformedArtifact {
            path: path.display().to_string(),
            detail: "expected feature columns then a `label` column".into(),
        });
    }
    let mut points = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut row = Vec::with_capacity(dims);
        for t in 0..dims {
            row.push(parse_field(path, record.get(t))?);
        }
        points.push(row);
        let label: i64 = parse_field(path, record.get(dims))?;
        labels.push(label as Label);
    }
    let mut meta = PropertyTags {
        k_star: 0,
        dimensions: dims,
        overlap: 0.0,
        imbalance: 0.0,
        has_noise: labels.iter().any(|&l| l == NOISE),
        compactness_level: tags.and_then(|t| t.compactness_level),
        distribution: tags.and_then(|t| t.distribution),
    };
    let dataset = Dataset::new(id, points, labels, meta.clone())?;
    meta.k_star = dataset.truth.k_star;
    meta.overlap = measure_overlap(&dataset)?;
    meta.imbalance = measure_imbalance(&dataset)?;
    Ok(Dataset { meta, ..dataset })
}

fn parse_field<T: std::str::FromStr>(path: &Path, field: Option<&str>) -> Result<T> {
    field
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::MalformedArtifact {
            path: path.display().to_string(),
            detail: format!("unparseable field `{}`", field.unwrap_or("<missing>")),
        })
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionRecord {
    source: String,
    labels: Vec<Label>,
}

/// Writes partitions as a JSON array of {source, labels}.
pub fn write_partitions_json(path: &Path, partitions: &[Partition]) -> Result<()> {
    let records: Vec<PartitionRecord> = partitions
        .iter()
        .map(|p| PartitionRecord { source: p.source.clone(), labels: p.labels.clone() })
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

pub fn read_partitions_json(path: &Path) -> Result<Vec<Partition>> {
    let text = std::fs::read_to_string(path).map_err(|_| missing(path))?;
    let records: Vec<PartitionRecord> = serde_json::from_str(&text)?;
    records.into_iter().map(|r| Partition::new(r.labels, r.source)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RankedSetFile {
    variant: Variant,
    reference_ranks: Vec<usize>,
    notes: Vec<String>,
    partitions: Vec<PartitionRecord>,
}

pub fn write_ranked_set_json(path: &Path, set: &RankedPartitionSet) -> Result<()> {
    let file = RankedSetFile {
        variant: set.variant,
        reference_ranks: set.reference_ranks.clone(),
        notes: set.notes.clone(),
        partitions: set
            .partitions
            .iter()
            .map(|p| PartitionRecord { source: p.source.clone(), labels: p.labels.clone() })
            .collect(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_ranked_set_json(path: &Path) -> Result<RankedPartitionSet> {
    let text = std::fs::read_to_string(path).map_err(|_| missing(path))?;
    let file: RankedSetFile = serde_json::from_str(&text)?;
    let partitions: Result<Vec<Partition>> =
        file.partitions.into_iter().map(|r| Partition::new(r.labels, r.source)).collect();
    Ok(RankedPartitionSet {
        variant: file.variant,
        partitions: partitions?,
        reference_ranks: file.reference_ranks,
        notes: file.notes,
    })
}

/// Internal index scores: one row per (partition, index).
pub fn write_internal_scores_csv(
    path: &Path,
    dataset: &str,
    rows: &[(String, usize, String, Option<f64>, Option<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "source", "k", "index", "raw", "adjusted"])?;
    for (source, k, index, raw, adjusted) in rows {
        w.write_record([
            dataset,
            source,
            &k.to_string(),
            index,
            &opt_str(*raw),
            &opt_str(*adjusted),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// (source, k, index) -> adjusted value (None when undefined).
pub type InternalScoreMap = BTreeMap<(String, String), Option<f64>>;

pub fn read_internal_scores_csv(path: &Path) -> Result<InternalScoreMap> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut out = BTreeMap::new();
    for record in r.records() {
        let record = record?;
        let source = record.get(1).unwrap_or_default().to_string();
        let index = record.get(3).unwrap_or_default().to_string();
        let adjusted = record.get(5).and_then(|s| s.parse().ok());
        out.insert((source, index), adjusted);
    }
    Ok(out)
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// External scores plus the aggregated rank, one row per partition.
pub fn write_external_scores_csv(
    path: &Path,
    dataset: &str,
    rows: &[(String, usize, Vec<f64>, f64)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "source", "k", "jaccard", "ss3", "ari", "nmi", "nid", "agg_rank"])?;
    for (source, k, scores, rank) in rows {
        let mut record = vec![dataset.to_string(), source.clone(), k.to_string()];
        record.extend(scores.iter().map(|v| format!("{v:?}")));
        record.push(format!("{rank:?}"));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of an external score file: (source, k, five raw scores, agg rank).
pub fn read_external_scores_csv(path: &Path) -> Result<Vec<(String, usize, Vec<f64>, f64)>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let source = record.get(1).unwrap_or_default().to_string();
        let k: usize = parse_field(path, record.get(2))?;
        let mut scores = Vec::with_capacity(5);
        for t in 3..8 {
            scores.push(parse_field(path, record.get(t))?);
        }
        let rank: f64 = parse_field(path, record.get(8))?;
        out.push((source, k, scores, rank));
    }
    Ok(out)
}

pub fn write_records_csv(path: &Path, records: &[EvaluationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "dataset",
        "source",
        "variant",
        "index",
        "top_pick_hit",
        "rho_all",
        "rho_under",
        "rho_over",
        "range",
        "k_star",
        "dimensions",
        "overlap",
        "imbalance",
        "has_noise",
        "compactness",
        "distribution",
    ])?;
    for r in records {
        w.write_record([
            r.dataset.as_str(),
            r.source.as_str(),
            r.variant.as_str(),
            r.index.as_str(),
            if r.top_pick_hit { "1" } else { "0" },
            &opt_str(r.rho_all),
            &opt_str(r.rho_under),
            &opt_str(r.rho_over),
            &opt_str(r.range),
            &r.tags.k_star.to_string(),
            &r.tags.dimensions.to_string(),
            &format!("{:?}", r.tags.overlap),
            &format!("{:?}", r.tags.imbalance),
            if r.tags.has_noise { "1" } else { "0" },
            r.tags.compactness_level.map(|c| c.name()).unwrap_or(""),
            r.tags.distribution.map(|d| d.name()).unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<EvaluationRecord>> {
    use crate::model::{CompactnessLevel, Distribution};
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or_default().to_string();
        let opt = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
        out.push(EvaluationRecord {
            dataset: get(0),
            source: get(1),
            variant: get(2),
            index: get(3),
            top_pick_hit: record.get(4) == Some("1"),
            rho_all: opt(5),
            rho_under: opt(6),
            rho_over: opt(7),
            range: opt(8),
            tags: PropertyTags {
                k_star: parse_field(path, record.get(9))?,
                dimensions: parse_field(path, record.get(10))?,
                overlap: parse_field(path, record.get(11))?,
                imbalance: parse_field(path, record.get(12))?,
                has_noise: record.get(13) == Some("1"),
                compactness_level: match record.get(14) {
                    Some("compact") => Some(CompactnessLevel::Compact),
                    Some("sparse") => Some(CompactnessLevel::Sparse),
                    Some("random") => Some(CompactnessLevel::Random),
                    _ => None,
                },
                distribution: record.get(15).and_then(|s| Distribution::parse(s).ok()),
            },
        });
    }
    Ok(out)
}

pub fn write_rejects_csv(path: &Path, rejects: &[RejectRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dataset", "source", "reason"])?;
    for r in rejects {
        w.write_record([r.dataset.as_str(), r.source.as_str(), r.reason.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary rows in the result-table style: value with rank in parentheses.
pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "group",
        "index",
        "n",
        "top_pick",
        "mean_rho_all",
        "median_rho_all",
        "mean_rho_under",
        "mean_rho_over",
        "mean_range",
    ])?;
    let mut groups: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    for group in groups {
        let members: Vec<&SummaryRow> = rows.iter().filter(|r| r.group == group).collect();
        let top_rank = rank_within(&members, |r| Some(r.top_pick_pct), true);
        let mean_rank = rank_within(&members, |r| r.mean_rho_all, true);
        let median_rank = rank_within(&members, |r| r.median_rho_all, true);
        let under_rank = rank_within(&members, |r| r.mean_rho_under, true);
        let over_rank = rank_within(&members, |r| r.mean_rho_over, true);
        let range_rank = rank_within(&members, |r| r.mean_range, false);
        for (i, row) in members.iter().enumerate() {
            w.write_record([
                row.group.as_str(),
                row.index.as_str(),
                &row.n.to_string(),
                &format!("{:.1}% ({})", row.top_pick_pct, fmt_rank(top_rank[i])),
                &fmt_cell(row.mean_rho_all, mean_rank[i]),
                &fmt_cell(row.median_rho_all, median_rank[i]),
                &fmt_cell(row.mean_rho_under, under_rank[i]),
                &fmt_cell(row.mean_rho_over, over_rank[i]),
                &fmt_cell(row.mean_range, range_rank[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt_rank(rank: Option<f64>) -> String {
    match rank {
        Some(r) if (r - r.round()).abs() < 1e-9 => format!("{}", r.round() as i64),
        Some(r) => format!("{r:.1}"),
        None => "-".into(),
    }
}

fn fmt_cell(value: Option<f64>, rank: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.3} ({})", v, fmt_rank(rank)),
        None => String::new(),
    }
}

fn rank_within<F: Fn(&SummaryRow) -> Option<f64>>(
    rows: &[&SummaryRow],
    get: F,
    max_better: bool,
) -> Vec<Option<f64>> {
    let values: Vec<Option<f64>> = rows.iter().map(|r| get(r)).collect();
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return vec![None; rows.len()];
    }
    let orientation =
        if max_better { crate::model::Orientation::Max } else { crate::model::Orientation::Min };
    let ranks = crate::model::average_ranks(&present, orientation).unwrap();
    let mut it = ranks.into_iter();
    values.into_iter().map(|v| v.map(|_| it.next().unwrap())).collect()
}

/// One generated dataset in the suite manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub seed: u64,
    pub tags: PropertyTags,
    pub config: GenConfig,
}

/// Suite manifest: everything needed to reproduce a run byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite: String,
    pub seed: u64,
    pub config_sha256: String,
    pub tool_version: String,
    /// Declared evaluation conventions that differ from defaults.
    pub notes: Vec<String>,
    pub datasets: Vec<ManifestEntry>,
    #[serde(default)]
    pub rejected_collections: usize,
    #[serde(default)]
    pub skipped_collections: usize,
}

pub fn write_manifest(path: &Path, manifest: &SuiteManifest) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<SuiteManifest> {
    let text = std::fs::read_to_string(path).map_err(|_| missing(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Plain `key = value` configuration text; `#` starts a comment.
pub fn parse_kv_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
