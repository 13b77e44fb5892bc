//! Suite configuration: a plain key-value grid of dataset properties plus
//! the scenario/algorithm/index selection.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cvbench_core::clustering::Algorithm;
use cvbench_core::datagen::{Compactness, GenConfig, ImbalanceMode};
use cvbench_core::internal::IndexId;
use cvbench_core::io::parse_kv_config;
use cvbench_core::Distribution;

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub name: String,
    pub k_star: Vec<usize>,
    pub dimensions: Vec<usize>,
    pub distributions: Vec<Distribution>,
    pub compactness: Vec<Compactness>,
    pub imbalance_modes: Vec<ImbalanceMode>,
    pub noise_fractions: Vec<f64>,
    pub seeds_per_config: usize,
    pub cluster_size_range: (usize, usize),
    pub total_cap: usize,
    pub overlap_max: f64,
    pub scenarios: Vec<u8>,
    pub algorithms: Vec<Algorithm>,
    pub indexes: Vec<IndexId>,
    pub kmeans_fixed_runs: usize,
    pub scenario3_runs: usize,
    /// Raw text the config was parsed from, for hashing.
    pub raw: String,
}

pub const BUILTIN_DESK_SMALL: &str = "\
# desk-small: quick end-to-end suite
k_star = 4,8
dimensions = 2
distribution = gaussian
compactness = 0.1
imbalance_mode = balanced
noise_fraction = 0
seeds_per_config = 1
cluster_size_range = 15,25
total_cap = 1000
overlap_max = 0.10
scenarios = 1,2,3
algorithms = kmeans,single,average,complete,ward
indexes = all
kmeans_fixed_runs = 10
scenario3_runs = 5
";

impl SuiteConfig {
    /// `source` is a path to a config file or a builtin suite name.
    pub fn load(source: &str) -> Result<SuiteConfig> {
        let path = Path::new(source);
        let (name, text) = if path.is_file() {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading suite config {source}"))?;
            let name =
                path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            (name, text)
        } else if source == "desk-small" {
            ("desk-small".to_string(), BUILTIN_DESK_SMALL.to_string())
        } else {
            bail!("suite `{source}` is neither a file nor a builtin (builtins: desk-small)");
        };
        SuiteConfig::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<SuiteConfig> {
        let kv = parse_kv_config(text)?;
        let cfg = SuiteConfig {
            name: name.to_string(),
            k_star: list(&kv, "k_star", parse_usize)?,
            dimensions: list(&kv, "dimensions", parse_usize)?,
            distributions: list_or(&kv, "distribution", |s| Ok(Distribution::parse(s)?), vec![
                Distribution::Gaussian,
            ])?,
            compactness: list_or(&kv, "compactness", parse_compactness, vec![Compactness::Fixed(
                0.1,
            )])?,
            imbalance_modes: list_or(&kv, "imbalance_mode", |s| Ok(ImbalanceMode::parse(s)?), vec![
                ImbalanceMode::Balanced,
            ])?,
            noise_fractions: list_or(&kv, "noise_fraction", parse_f64, vec![0.0])?,
            seeds_per_config: scalar_or(&kv, "seeds_per_config", parse_usize, 1)?,
            cluster_size_range: pair_or(&kv, "cluster_size_range", (20, 100))?,
            total_cap: scalar_or(&kv, "total_cap", parse_usize, 1000)?,
            overlap_max: scalar_or(&kv, "overlap_max", parse_f64, 0.10)?,
            scenarios: list_or(&kv, "scenarios", parse_u8, vec![1, 2, 3])?,
            algorithms: list_or(&kv, "algorithms", |s| Ok(Algorithm::parse(s)?), Algorithm::all()
                .to_vec())?,
            indexes: parse_indexes(kv.get("indexes").map(String::as_str).unwrap_or("all"))?,
            kmeans_fixed_runs: scalar_or(&kv, "kmeans_fixed_runs", parse_usize, 10)?,
            scenario3_runs: scalar_or(&kv, "scenario3_runs", parse_usize, 5)?,
            raw: text.to_string(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_star.is_empty() || self.dimensions.is_empty() || self.seeds_per_config == 0 {
            bail!("dataset grid is empty");
        }
        cvbench_core::evaluation::validate_scenarios(&self.scenarios)
            .map_err(|e| anyhow!("{e}"))?;
        if self.scenarios.contains(&3) {
            let gaussian_noise_free = self.distributions.contains(&Distribution::Gaussian)
                && self.noise_fractions.contains(&0.0);
            if !gaussian_noise_free {
                bail!(
                    "scenario 3 requires gaussian, noise-free datasets in the grid \
                     (distribution must include `gaussian` and noise_fraction must include 0)"
                );
            }
        }
        Ok(())
    }

    /// Cartesian product of the property grid, one GenConfig per dataset.
    /// Seeds derive from the suite seed by dataset index, so adding
    /// configurations never perturbs earlier datasets.
    pub fn dataset_grid(&self, suite_seed: u64) -> Vec<(String, GenConfig)> {
        let mut out = Vec::new();
        let mut index = 0u64;
        for &k_star in &self.k_star {
            for &dimensions in &self.dimensions {
                for &distribution in &self.distributions {
                    for &compactness in &self.compactness {
                        for &imbalance_mode in &self.imbalance_modes {
                            for &noise_fraction in &self.noise_fractions {
                                for _ in 0..self.seeds_per_config {
                                    let id = format!("ds{index:04}");
                                    out.push((
                                        id,
                                        GenConfig {
                                            k_star,
                                            dimensions,
                                            cluster_size_range: self.cluster_size_range,
                                            total_cap: self.total_cap,
                                            distribution,
                                            imbalance_mode,
                                            compactness,
                                            noise_fraction,
                                            overlap_max: self.overlap_max,
                                            seed: cvbench_core::derive_seed(suite_seed, index),
                                        },
                                    ));
                                    index += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn parse_indexes(spec: &str) -> Result<Vec<IndexId>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(IndexId::all().to_vec());
    }
    spec.split(',')
        .map(|s| IndexId::parse(s).map_err(|e| anyhow!("{e}")))
        .collect()
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| anyhow!("expected an integer, got `{s}`"))
}

fn parse_u8(s: &str) -> Result<u8> {
    s.trim().parse().map_err(|_| anyhow!("expected an integer, got `{s}`"))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| anyhow!("expected a number, got `{s}`"))
}

fn parse_compactness(s: &str) -> Result<Compactness> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("random") {
        Ok(Compactness::RandomUnit)
    } else {
        Ok(Compactness::Fixed(parse_f64(s)?))
    }
}

fn list<T, F: Fn(&str) -> Result<T>>(
    kv: &BTreeMap<String, String>,
    key: &str,
    parse: F,
) -> Result<Vec<T>> {
    let raw = kv.get(key).ok_or_else(|| anyhow!("missing config key `{key}`"))?;
    raw.split(',').map(|s| parse(s)).collect::<Result<Vec<T>>>().context(format!("key `{key}`"))
}

fn list_or<T, F: Fn(&str) -> Result<T>>(
    kv: &BTreeMap<String, String>,
    key: &str,
    parse: F,
    default: Vec<T>,
) -> Result<Vec<T>> {
    match kv.get(key) {
        None => Ok(default),
        Some(raw) =>

            raw.split(',').map(|s| parse(s)).collect::<Result<Vec<T>>>().context(format!("key `{key}`")),
    }
}

fn scalar_or<T, F: Fn(&str) -> Result<T>>(
    kv: &BTreeMap<String, String>,
    key: &str,
    parse: F,
    default: T,
) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(raw) => parse(raw).context(format!("key `{key}`")),
    }
}

fn pair_or(
    kv: &BTreeMap<String, String>,
    key: &str,
    default: (usize, usize),
) -> Result<(usize, usize)> {
    match kv.get(key) {
        None => Ok(default),
        Some(raw) => {
            let parts: Vec<&str> = raw.split(',').collect();
            if parts.len() != 2 {
                bail!("key `{key}` expects `lo,hi`");
            }
            Ok((parse_usize(parts[0])?, parse_usize(parts[1])?))
        }
    }
}
