//! `cvbench`: generate synthetic clustering benchmarks, produce candidate
//! partitions, score them with internal and external validity indexes,
//! and evaluate index performance against reference rankings.

mod config;
mod pipeline;

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use cvbench_core::clustering::{compute_k_max, cut_at, run_agglomerative, run_kmeans, Algorithm};
use cvbench_core::external::evaluate_collection;
use cvbench_core::internal::compute_internal;
use cvbench_core::io;
use cvbench_core::model::compute_distance_matrix;
use cvbench_core::supervised::{fixed_k_target, procedure_fixed_k, procedure1_varied, procedure2_varied, FixedVariant};
use cvbench_core::derive_seed;

use config::{parse_indexes, SuiteConfig};
use pipeline::Layout;

#[derive(Parser)]
#[command(name = "cvbench", version, about = "Clustering validity index benchmark")]
struct Cli {
    /// Master seed for all randomized stages.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset grid from a key-value config file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce candidate partitions for one dataset CSV.
    Cluster {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated: kmeans,single,average,complete,ward.
        #[arg(long, default_value = "kmeans,single,average,complete,ward")]
        algos: String,
        #[arg(long, default_value_t = 2)]
        kmin: usize,
        /// Either a number or `auto` (max(25, 1.75 k*), capped at N-1).
        #[arg(long, default_value = "auto")]
        kmax: String,
        /// Merge externally produced partitions from this JSON file.
        #[arg(long)]
        import: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute internal validity indexes for stored partitions.
    Index {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        partitions: PathBuf,
        /// `all` or a comma-separated subset.
        #[arg(long, default_value = "all")]
        indexes: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute external validity indexes plus the aggregated rank.
    External {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        partitions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Supervised ranked partition sets from a Gaussian noise-free dataset.
    Scenario3Gen {
        #[arg(long)]
        data: PathBuf,
        /// p1 (merging, k < k*) or p2 (splitting, k > k*).
        #[arg(long)]
        variant: String,
        /// varied or fixed.
        #[arg(long, default_value = "varied")]
        mode: String,
        /// Partitions per fixed-k set.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Fixed-k target; defaults to the +/-30% rule.
        #[arg(long)]
        target_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one scenario from a suite output directory.
    Eval {
        #[arg(long)]
        scenario: u8,
        /// Suite directory produced by `generate`/`cluster`/`index`/`external`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical comparison tables from a records file.
    Stats {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: generate, cluster, index, external, eval, stats.
    Run {
        /// Path to a suite config or a builtin name (desk-small).
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .expect("thread pool not yet initialized");
    }
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let name = config
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "suite".into());
            let cfg = SuiteConfig::parse(&name, &text)?;
            std::fs::create_dir_all(&out)?;
            let manifest = pipeline::generate_stage(&Layout::new(&out), &cfg, cli.seed)?;
            println!("generated {} datasets into {}", manifest.datasets.len(), out.display());
            Ok(())
        }
        Command::Cluster { data, algos, kmin, kmax, import, out } => {
            let dataset = read_dataset(&data)?;
            let algorithms: Vec<Algorithm> = algos
                .split(',')
                .map(|s| Algorithm::parse(s).map_err(|e| anyhow!("{e}")))
                .collect::<Result<_>>()?;
            let k_hi = match kmax.trim() {
                "auto" => compute_k_max(dataset.truth.k_star),
                other => other.parse().context("--kmax expects a number or `auto`")?,
            }
            .min(dataset.n() - 1);
            if kmin < 2 || kmin > k_hi {
                bail!("empty sweep range [{kmin}, {k_hi}]");
            }
            let mut partitions = Vec::new();
            for algo in algorithms {
                match algo.linkage() {
                    Some(method) => {
                        let dendro = run_agglomerative(&dataset, method)?;
                        for k in kmin..=k_hi {
                            partitions.push(cut_at(&dendro, k, &format!("{}(k={k})", algo.name()))?);
                        }
                    }
                    None => {
                        for k in kmin..=k_hi {
                            partitions.push(run_kmeans(&dataset, k, derive_seed(cli.seed, k as u64))?);
                        }
                    }
                }
            }
            if let Some(path) = import {
                let imported = io::read_partitions_json(&path)?;
                for p in &imported {
                    if p.labels.len() != dataset.n() {
                        bail!(
                            "imported partition `{}` has {} labels, dataset has {} points",
                            p.source,
                            p.labels.len(),
                            dataset.n()
                        );
                    }
                }
                partitions.extend(imported);
            }
            io::write_partitions_json(&out, &partitions)?;
            println!("wrote {} partitions to {}", partitions.len(), out.display());
            Ok(())
        }
        Command::Index { data, partitions, indexes, out } => {
            let dataset = read_dataset(&data)?;
            let parts = io::read_partitions_json(&partitions)?;
            let ids = parse_indexes(&indexes)?;
            let dist = compute_distance_matrix(&dataset.points)?;
            let mut rows = Vec::new();
            for p in &parts {
                for &id in &ids {
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
            io::write_internal_scores_csv(&out, &dataset.id, &rows)?;
            println!("wrote {} score rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::External { data, partitions, out } => {
            let dataset = read_dataset(&data)?;
            let parts = io::read_partitions_json(&partitions)?;
            if parts.len() < 2 {
                bail!("need at least 2 partitions to rank");
            }
            let eval = evaluate_collection(&dataset.truth.labels, &parts)?;
            let rows: Vec<(String, usize, Vec<f64>, f64)> = parts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (p.source.clone(), p.k, eval.scores[i].clone(), eval.aggregated_ranks[i])
                })
                .collect();
            io::write_external_scores_csv(&out, &dataset.id, &rows)?;
            println!("wrote {} score rows to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Scenario3Gen { data, variant, mode, runs, target_k, out } => {
            let dataset = read_dataset(&data)?;
            let set = match (variant.as_str(), mode.as_str()) {
                ("p1", "varied") => procedure1_varied(&dataset)?,
                ("p2", "varied") => procedure2_varied(&dataset)?,
                ("p1", "fixed") => {
                    let target = target_k
                        .unwrap_or_else(|| fixed_k_target(dataset.truth.k_star, 0.7, dataset.n()));
                    procedure_fixed_k(&dataset, FixedVariant::P1, target, runs)?
                }
                ("p2", "fixed") => {
                    let target = target_k
                        .unwrap_or_else(|| fixed_k_target(dataset.truth.k_star, 1.3, dataset.n()));
                    procedure_fixed_k(&dataset, FixedVariant::P2, target, runs)?
                }
                _ => bail!("--variant must be p1|p2 and --mode varied|fixed"),
            };
            io::write_ranked_set_json(&out, &set)?;
            println!(
                "wrote {} ranked partitions ({}) to {}",
                set.partitions.len(),
                set.variant.name(),
                out.display()
            );
            Ok(())
        }
        Command::Eval { scenario, data, out } => {
            let layout = Layout::new(&data);
            let result = pipeline::eval_stage_to(&layout, scenario, &out)?;
            println!(
                "scenario {scenario}: {} records, {} rejects, {} excluded cells -> {}",
                result.records.len(),
                result.rejects.len(),
                result.excluded_cells,
                out.display()
            );
            Ok(())
        }
        Command::Stats { records, out } => {
            pipeline::stats_stage(&records, &out)?;
            println!("wrote statistics tables to {}", out.display());
            Ok(())
        }
        Command::Run { suite, out } => {
            let cfg = SuiteConfig::load(&suite)?;
            pipeline::run_pipeline(&out, &cfg, cli.seed)?;
            println!("suite `{}` complete: {}", cfg.name, out.display());
            Ok(())
        }
    }
}

fn read_dataset(path: &PathBuf) -> Result<cvbench_core::Dataset> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".into());
    // Pick up generation tags when the CSV lives in a suite layout.
    let tags = path
        .parent()
        .and_then(|dir| dir.parent())
        .map(|root| Layout::new(root).manifest())
        .filter(|m| m.exists())
        .and_then(|m| io::read_manifest(&m).ok())
        .and_then(|m| m.datasets.into_iter().find(|e| e.id == id).map(|e| e.tags));
    Ok(io::read_dataset_csv(path, &id, tags.as_ref())?)
}
