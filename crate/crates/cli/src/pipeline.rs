//! Pipeline stages. Stages communicate only through files under the
//! output directory:
//!
//! ```text
//! out/
//!   manifest.json
//!   datasets/<id>.csv
//!   partitions/<id>.s1.json        sweep candidates, all algorithms
//!   partitions/<id>.s2.json        fixed-k candidates, deduplicated
//!   scenario3/<id>.<variant>.json  supervised ranked sets
//!   scores/<id>.s{1,2}.internal.csv / .external.csv, <id>.s3.internal.csv
//!   eval/scenario{1,2,3}/{records,summary,rejects}.csv
//!   stats/{pairwise_wilcoxon,property_tests}.csv
//! ```
//!
//! A later stage never regenerates a missing intermediate; it fails
//! naming the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use cvbench_core::clustering::{compute_k_max, fixed_k_candidates, sweep_varied_k, SweepSpec};
use cvbench_core::datagen::generate_dataset;
use cvbench_core::evaluation::{
    self, collection_records, dedupe_partitions, filter_collection, property_groups,
    summarize, summarize_by, CollectionScores, ReferenceRanking, RejectRecord,
    ScenarioOutput,
};
use cvbench_core::external::{evaluate_collection, similarity, ExternalIndex};
use cvbench_core::internal::{compute_internal, IndexId};
use cvbench_core::io;
use cvbench_core::model::{compute_distance_matrix, Dataset, Orientation, Partition};
use cvbench_core::stats::{property_association, wilcoxon_pairwise, PropertyKey};
use cvbench_core::supervised::scenario3_sets;
use cvbench_core::{derive_seed, Error};

use crate::config::SuiteConfig;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Layout {
        Layout { root: root.to_path_buf() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn dataset(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.csv"))
    }

    pub fn partitions(&self, id: &str, scenario: u8) -> PathBuf {
        self.root.join("partitions").join(format!("{id}.s{scenario}.json"))
    }

    pub fn ranked_set(&self, id: &str, variant: &str) -> PathBuf {
        self.root.join("scenario3").join(format!("{id}.{variant}.json"))
    }

    pub fn internal_scores(&self, id: &str, scenario: u8) -> PathBuf {
        self.root.join("scores").join(format!("{id}.s{scenario}.internal.csv"))
    }

    pub fn external_scores(&self, id: &str, scenario: u8) -> PathBuf {
        self.root.join("scores").join(format!("{id}.s{scenario}.external.csv"))
    }

    pub fn eval_dir(&self, scenario: u8) -> PathBuf {
        self.root.join("eval").join(format!("scenario{scenario}"))
    }

    pub fn stats_dir(&self) -> PathBuf {
        self.root.join("stats")
    }

    fn ensure(&self, sub: &str) -> Result<()> {
        std::fs::create_dir_all(self.root.join(sub))?;
        Ok(())
    }
}

pub fn config_hash(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Stage: generate the dataset grid and write the suite manifest.
pub fn generate_stage(layout: &Layout, cfg: &SuiteConfig, seed: u64) -> Result<io::SuiteManifest> {
    layout.ensure("datasets")?;
    let grid = cfg.dataset_grid(seed);
    if grid.is_empty() {
        bail!("stage generate: dataset grid is empty");
    }
    let mut entries = Vec::with_capacity(grid.len());
    for (id, gen) in &grid {
        let dataset = generate_dataset(id.clone(), gen)
            .with_context(|| format!("stage generate failed (dataset {id})"))?;
        io::write_dataset_csv(&layout.dataset(id), &dataset)
            .with_context(|| format!("stage generate failed (dataset {id})"))?;
        entries.push(io::ManifestEntry {
            id: id.clone(),
            file: format!("datasets/{id}.csv"),
            seed: gen.seed,
            tags: dataset.meta.clone(),
            config: gen.clone(),
        });
    }
    let manifest = io::SuiteManifest {
        suite: cfg.name.clone(),
        seed,
        config_sha256: config_hash(&cfg.raw),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        notes: vec![
            "external aggregate sums ranks of 5 indexes: jaccard, ss3, ari, nmi, nid".into(),
        ],
        datasets: entries,
        rejected_collections: 0,
        skipped_collections: 0,
    };
    io::write_manifest(&layout.manifest(), &manifest)?;
    Ok(manifest)
}

fn load_dataset(layout: &Layout, entry: &io::ManifestEntry) -> Result<Dataset> {
    io::read_dataset_csv(&layout.dataset(&entry.id), &entry.id, Some(&entry.tags))
        .with_context(|| format!("loading dataset {}", entry.id))
}

/// Stage: produce sweep partitions (scenario 1) and fixed-k candidates
/// (scenario 2) for every dataset.
pub fn cluster_stage(layout: &Layout, cfg: &SuiteConfig, seed: u64) -> Result<()> {
    layout.ensure("partitions")?;
    let manifest = io::read_manifest(&layout.manifest())?;
    for (i, entry) in manifest.datasets.iter().enumerate() {
        let dataset = load_dataset(layout, entry)?;
        let dseed = derive_seed(seed, i as u64);
        if cfg.scenarios.contains(&1) {
            let spec =
                SweepSpec::new(compute_k_max(dataset.truth.k_star), cfg.algorithms.clone());
            let collections = sweep_varied_k(&dataset, &spec, dseed)
                .with_context(|| format!("stage cluster failed (dataset {})", entry.id))?;
            let all: Vec<Partition> =
                collections.into_iter().flat_map(|c| c.partitions).collect();
            io::write_partitions_json(&layout.partitions(&entry.id, 1), &all)?;
        }
        if cfg.scenarios.contains(&2) {
            let mut all = Vec::new();
            for (_, k) in evaluation::scenario2_targets(dataset.truth.k_star, dataset.n()) {
                let candidates = fixed_k_candidates(
                    &dataset,
                    k,
                    cfg.kmeans_fixed_runs,
                    derive_seed(dseed, k as u64),
                )
                .with_context(|| format!("stage cluster failed (dataset {})", entry.id))?;
                all.extend(dedupe_partitions(candidates));
            }
            io::write_partitions_json(&layout.partitions(&entry.id, 2), &all)?;
        }
    }
    Ok(())
}

/// Stage: supervised ranked partition sets for scenario 3.
pub fn scenario3_stage(layout: &Layout, cfg: &SuiteConfig) -> Result<usize> {
    layout.ensure("scenario3")?;
    let manifest = io::read_manifest(&layout.manifest())?;
    let mut skipped = 0usize;
    for entry in &manifest.datasets {
        let dataset = load_dataset(layout, entry)?;
        let (sets, skips) = scenario3_sets(&dataset, cfg.scenario3_runs);
        skipped += skips.len();
        for set in sets {
            io::write_ranked_set_json(
                &layout.ranked_set(&entry.id, set.variant.name()),
                &set,
            )?;
        }
    }
    Ok(skipped)
}

fn partitions_for(layout: &Layout, id: &str, scenario: u8) -> Result<Vec<Partition>> {
    io::read_partitions_json(&layout.partitions(id, scenario))
        .with_context(|| format!("stage requires partitions for dataset {id} (scenario {scenario}); run `cvbench cluster` first"))
}

/// Stage: internal index scores for every produced partition.
pub fn index_stage(layout: &Layout, cfg: &SuiteConfig) -> Result<()> {
    layout.ensure("scores")?;
    let manifest = io::read_manifest(&layout.manifest())?;
    for entry in &manifest.datasets {
        let dataset = load_dataset(layout, entry)?;
        let dist = compute_distance_matrix(&dataset.points).map_err(anyhow::Error::from)?;
        let mut jobs: Vec<(u8, Vec<Partition>)> = Vec::new();
        for scenario in [1u8, 2] {
            if cfg.scenarios.contains(&scenario) {
                jobs.push((scenario, partitions_for(layout, &entry.id, scenario)?));
            }
        }
        if cfg.scenarios.contains(&3) {
            let mut parts = Vec::new();
            for variant in ["p1_varied", "p1_fixed", "p2_varied", "p2_fixed"] {
                let path = layout.ranked_set(&entry.id, variant);
                if path.exists() {
                    parts.extend(io::read_ranked_set_json(&path)?.partitions);
                }
            }
            if !parts.is_empty() {
                jobs.push((3, parts));
            }
        }
        for (scenario, partitions) in jobs {
            let mut rows = Vec::new();
            for p in &partitions {
                for &id in &cfg.indexes {
                    let score = compute_internal(id, &dataset, &dist, p).ok();
                    rows.push((
                        p.source.clone(),
                        p.k,
                        id.name().to_string(),
                        score.map(|s| s.raw),
                        score.map(|s| s.adjusted),
                    ));
                }
            }
            io::write_internal_scores_csv(
                &layout.internal_scores(&entry.id, scenario),
                &entry.id,
                &rows,
            )?;
        }
    }
    Ok(())
}

/// Splits a partition list into per-collection groups by the algorithm
/// prefix of the source tag (the text before the first parenthesis).
fn group_by_algorithm(partitions: Vec<Partition>) -> Vec<(String, Vec<Partition>)> {
    let mut groups: Vec<(String, Vec<Partition>)> = Vec::new();
    for p in partitions {
        let prefix = p.source.split('(').next().unwrap_or("").to_string();
        match groups.iter_mut().find(|(g, _)| *g == prefix) {
            Some((_, v)) => v.push(p),
            None => groups.push((prefix, vec![p])),
        }
    }
    groups
}

/// Scenario-2 collections group by target cluster count.
fn group_by_k(partitions: Vec<Partition>) -> Vec<(usize, Vec<Partition>)> {
    let mut groups: Vec<(usize, Vec<Partition>)> = Vec::new();
    for p in partitions {
        match groups.iter_mut().find(|(k, _)| *k == p.k) {
            Some((_, v)) => v.push(p),
            None => groups.push((p.k, vec![p])),
        }
    }
    groups
}

/// Stage: external scores and aggregated ranks per collection.
pub fn external_stage(layout: &Layout, cfg: &SuiteConfig) -> Result<()> {
    layout.ensure("scores")?;
    let manifest = io::read_manifest(&layout.manifest())?;
    for entry in &manifest.datasets {
        let dataset = load_dataset(layout, entry)?;
        for scenario in [1u8, 2] {
            if !cfg.scenarios.contains(&scenario) {
                continue;
            }
            let partitions = partitions_for(layout, &entry.id, scenario)?;
            let collections: Vec<Vec<Partition>> = if scenario == 1 {
                group_by_algorithm(partitions).into_iter().map(|(_, v)| v).collect()
            } else {
                group_by_k(partitions).into_iter().map(|(_, v)| v).collect()
            };
            let mut rows = Vec::new();
            for group in collections {
                if group.len() < 2 {
                    // A lone partition cannot be ranked; keep scores with rank 1.
                    for p in &group {
                        let scores: Vec<f64> = ExternalIndex::all()
                            .iter()
                            .map(|&e| {
                                cvbench_core::external::external_score(
                                    e,
                                    &dataset.truth.labels,
                                    &p.labels,
                                )
                                .unwrap_or(f64::NAN)
                            })
                            .collect();
                        rows.push((p.source.clone(), p.k, scores, 1.0));
                    }
                    continue;
                }
                let eval = evaluate_collection(&dataset.truth.labels, &group)
                    .map_err(anyhow::Error::from)?;
                for (i, p) in group.iter().enumerate() {
                    rows.push((
                        p.source.clone(),
                        p.k,
                        eval.scores[i].clone(),
                        eval.aggregated_ranks[i],
                    ));
                }
            }
            io::write_external_scores_csv(
                &layout.external_scores(&entry.id, scenario),
                &entry.id,
                &rows,
            )?;
        }
    }
    Ok(())
}

/// Stage: evaluation records + summaries for one scenario, read purely
/// from artifacts, written to the suite's eval directory.
pub fn eval_stage(layout: &Layout, scenario: u8) -> Result<ScenarioOutput> {
    let dir = layout.eval_dir(scenario);
    eval_stage_to(layout, scenario, &dir)
}

/// As [`eval_stage`] but with an explicit output directory.
pub fn eval_stage_to(layout: &Layout, scenario: u8, dir: &Path) -> Result<ScenarioOutput> {
    let manifest = io::read_manifest(&layout.manifest())?;
    let mut out = ScenarioOutput::default();
    for entry in &manifest.datasets {
        let part = match scenario {
            1 | 2 => eval_external_referenced(layout, entry, scenario)?,
            3 => eval_scenario3(layout, entry)?,
            _ => bail!("unknown scenario {scenario}"),
        };
        out.records.extend(part.records);
        out.rejects.extend(part.rejects);
        out.excluded_cells += part.excluded_cells;
    }
    std::fs::create_dir_all(dir)?;
    io::write_records_csv(&dir.join("records.csv"), &out.records)?;
    io::write_rejects_csv(&dir.join("rejects.csv"), &out.rejects)?;
    io::write_summary_csv(&dir.join("summary.csv"), &summarize(&out.records))?;
    io::write_summary_csv(
        &dir.join("summary_by_property.csv"),
        &summarize_by(&out.records, property_groups),
    )?;
    match scenario {
        1 => io::write_summary_csv(
            &dir.join("summary_by_algorithm.csv"),
            &summarize_by(&out.records, |r| vec![r.source.clone()]),
        )?,
        2 | 3 => io::write_summary_csv(
            &dir.join("summary_by_variant.csv"),
            &summarize_by(&out.records, |r| vec![r.variant.clone()]),
        )?,
        _ => {}
    }
    Ok(out)
}

/// Shared scenario 1/2 evaluation from stored partitions and scores.
fn eval_external_referenced(
    layout: &Layout,
    entry: &io::ManifestEntry,
    scenario: u8,
) -> Result<ScenarioOutput> {
    let id = &entry.id;
    let partitions = partitions_for(layout, id, scenario)?;
    let internal = io::read_internal_scores_csv(&layout.internal_scores(id, scenario))
        .with_context(|| format!("stage eval requires internal scores for {id}; run `cvbench index` first"))?;
    let external = io::read_external_scores_csv(&layout.external_scores(id, scenario))
        .with_context(|| format!("stage eval requires external scores for {id}; run `cvbench external` first"))?;

    let mut index_names: Vec<String> =
        internal.keys().map(|(_, index)| index.clone()).collect();
    index_names.sort();
    index_names.dedup();

    let groups: Vec<(String, String, Vec<Partition>)> = if scenario == 1 {
        group_by_algorithm(partitions)
            .into_iter()
            .map(|(algo, v)| (algo.clone(), String::new(), v))
            .collect()
    } else {
        let k_star = entry.tags.k_star;
        group_by_k(partitions)
            .into_iter()
            .map(|(k, v)| {
                let kind = if k == k_star {
                    "equal"
                } else if k < k_star {
                    "under"
                } else {
                    "over"
                };
                ("mixed".to_string(), kind.to_string(), v)
            })
            .collect()
    };

    let ari_col = ExternalIndex::all().iter().position(|&e| e == ExternalIndex::Ari).unwrap();
    let mut out = ScenarioOutput::default();
    for (source, variant, group) in groups {
        if scenario == 2 && group.len() < evaluation::MIN_UNIQUE_PARTITIONS {
            out.rejects.push(RejectRecord {
                dataset: id.clone(),
                source: format!("fixed_k={}", group.first().map(|p| p.k).unwrap_or(0)),
                reason: format!(
                    "{} unique partitions, need {}",
                    group.len(),
                    evaluation::MIN_UNIQUE_PARTITIONS
                ),
            });
            continue;
        }
        let rows: Vec<&(String, usize, Vec<f64>, f64)> = group
            .iter()
            .map(|p| {
                external
                    .iter()
                    .find(|(source, _, _, _)| *source == p.source)
                    .ok_or_else(|| {
                        anyhow::Error::from(Error::MissingArtifact(format!(
                            "external score row for {id}/{}",
                            p.source
                        )))
                    })
            })
            .collect::<Result<_>>()?;
        if scenario == 1 {
            let aris: Vec<f64> = rows.iter().map(|r| r.2[ari_col]).collect();
            let decision = filter_collection(&aris);
            if !decision.accepted {
                out.rejects.push(RejectRecord {
                    dataset: id.clone(),
                    source: source.clone(),
                    reason: format!(
                        "max ARI {:.4} below {}",
                        decision.max_ari,
                        evaluation::ARI_ACCEPT_THRESHOLD
                    ),
                });
                continue;
            }
        }
        let ks: Vec<usize> = group.iter().map(|p| p.k).collect();
        let agg: Vec<f64> = rows.iter().map(|r| r.3).collect();
        let reference = ReferenceRanking::new(agg, &ks);
        let index_scores: Vec<(String, Orientation, Vec<Option<f64>>)> = index_names
            .iter()
            .map(|name| {
                let orientation = IndexId::parse(name)
                    .map(|id| id.orientation())
                    .unwrap_or(Orientation::Max);
                let scores: Vec<Option<f64>> = group
                    .iter()
                    .map(|p| {
                        internal.get(&(p.source.clone(), name.clone())).copied().flatten()
                    })
                    .collect();
                (name.clone(), orientation, scores)
            })
            .collect();
        let scores = CollectionScores {
            dataset: id,
            source: &source,
            variant: &variant,
            tags: &entry.tags,
            ks,
            reference,
            index_scores,
        };
        let (records, dropped) = collection_records(&scores).map_err(anyhow::Error::from)?;
        out.records.extend(records);
        out.excluded_cells += dropped;
    }
    Ok(out)
}

fn eval_scenario3(layout: &Layout, entry: &io::ManifestEntry) -> Result<ScenarioOutput> {
    let id = &entry.id;
    let mut out = ScenarioOutput::default();
    let mut sets = Vec::new();
    for variant in ["p1_varied", "p1_fixed", "p2_varied", "p2_fixed"] {
        let path = layout.ranked_set(id, variant);
        if path.exists() {
            sets.push(io::read_ranked_set_json(&path)?);
        }
    }
    if sets.is_empty() {
        out.rejects.push(RejectRecord {
            dataset: id.clone(),
            source: "scenario3".into(),
            reason: "no supervised sets produced".into(),
        });
        return Ok(out);
    }
    let internal = io::read_internal_scores_csv(&layout.internal_scores(id, 3))
        .with_context(|| format!("stage eval requires internal scores for {id}; run `cvbench index` first"))?;
    let dataset = load_dataset(layout, entry)?;
    let mut index_names: Vec<String> =
        internal.keys().map(|(_, index)| index.clone()).collect();
    index_names.sort();
    index_names.dedup();

    for set in &sets {
        let ks: Vec<usize> = set.partitions.iter().map(|p| p.k).collect();
        let ranks: Vec<f64> = set.reference_ranks.iter().map(|&r| r as f64).collect();
        let reference = ReferenceRanking::new(ranks, &ks);
        let mut index_scores: Vec<(String, Orientation, Vec<Option<f64>>)> = index_names
            .iter()
            .map(|name| {
                let orientation = IndexId::parse(name)
                    .map(|id| id.orientation())
                    .unwrap_or(Orientation::Max);
                let scores: Vec<Option<f64>> = set
                    .partitions
                    .iter()
                    .map(|p| internal.get(&(p.source.clone(), name.clone())).copied().flatten())
                    .collect();
                (name.clone(), orientation, scores)
            })
            .collect();
        for ext in ExternalIndex::all() {
            let scores: Vec<Option<f64>> = set
                .partitions
                .iter()
                .map(|p| similarity(ext, &dataset.truth.labels, &p.labels).ok())
                .collect();
            index_scores.push((format!("ext:{}", ext.name()), Orientation::Max, scores));
        }
        let scores = CollectionScores {
            dataset: id,
            source: set.variant.name(),
            variant: set.variant.name(),
            tags: &entry.tags,
            ks,
            reference,
            index_scores,
        };
        let (records, dropped) = collection_records(&scores).map_err(anyhow::Error::from)?;
        out.records.extend(records);
        out.excluded_cells += dropped;
    }
    Ok(out)
}

/// Stage: pairwise index comparison and property-effect tests over a
/// records file.
pub fn stats_stage(records_path: &Path, out_dir: &Path) -> Result<()> {
    let records = io::read_records_csv(records_path)?;
    if records.is_empty() {
        bail!("stage stats: {} contains no records", records_path.display());
    }
    std::fs::create_dir_all(out_dir)?;

    let mut index_names: Vec<String> = records
        .iter()
        .filter(|r| !r.index.starts_with("ext:"))
        .map(|r| r.index.clone())
        .collect();
    index_names.sort();
    index_names.dedup();

    let matrix = evaluation::paired_rho_matrix(&records, &index_names);
    let n_paired = matrix.first().map(Vec::len).unwrap_or(0);
    if n_paired < 5 {
        eprintln!(
            "warning: only {n_paired} fully-paired collections; pairwise tests are weak"
        );
    }
    let mut w = csv::WriterBuilder::new().from_path(out_dir.join("pairwise_wilcoxon.csv"))?;
    w.write_record(["index_a", "index_b", "n", "statistic", "p", "adjusted_p", "significant"])?;
    if n_paired >= 2 {
        for (i, j, r) in wilcoxon_pairwise(&matrix).map_err(anyhow::Error::from)? {
            w.write_record([
                index_names[i].as_str(),
                index_names[j].as_str(),
                &r.n.to_string(),
                &format!("{:?}", r.statistic),
                &format!("{:?}", r.p_value),
                &format!("{:?}", r.adjusted_p.unwrap_or(r.p_value)),
                if r.significant_at(0.05) { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::WriterBuilder::new().from_path(out_dir.join("property_tests.csv"))?;
    w.write_record(["property", "index", "method", "statistic", "p", "significant"])?;
    for property in PropertyKey::all() {
        for (index, r) in property_association(&records, property) {
            w.write_record([
                property.name(),
                &index,
                &format!("{:?}", r.method).to_lowercase(),
                &format!("{:?}", r.statistic),
                &format!("{:?}", r.p_value),
                if r.significant_at(0.05) { "1" } else { "0" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Full pipeline: generate, cluster, scenario3-gen, index, external,
/// eval per scenario, stats. Updates the manifest with reject counts.
pub fn run_pipeline(out: &Path, cfg: &SuiteConfig, seed: u64) -> Result<()> {
    let layout = Layout::new(out);
    std::fs::create_dir_all(out)?;
    let mut manifest =
        generate_stage(&layout, cfg, seed).context("stage generate failed")?;
    cluster_stage(&layout, cfg, derive_seed(seed, 0xC1)).context("stage cluster failed")?;
    let mut skipped = 0usize;
    if cfg.scenarios.contains(&3) {
        skipped += scenario3_stage(&layout, cfg).context("stage scenario3-gen failed")?;
    }
    index_stage(&layout, cfg).context("stage index failed")?;
    external_stage(&layout, cfg).context("stage external failed")?;
    let mut rejected = 0usize;
    for &scenario in &cfg.scenarios {
        let out = eval_stage(&layout, scenario)
            .with_context(|| format!("stage eval failed (scenario {scenario})"))?;
        rejected += out.rejects.len();
    }
    if cfg.scenarios.contains(&1) {
        let records = layout.eval_dir(1).join("records.csv");
        stats_stage(&records, &layout.stats_dir()).context("stage stats failed")?;
    }
    manifest.rejected_collections = rejected;
    manifest.skipped_collections = skipped;
    io::write_manifest(&layout.manifest(), &manifest)?;
    Ok(())
}
