//! Shared fixtures for the criterion benchmarks.

use cvbench_core::datagen::{generate_dataset, Compactness, GenConfig};
use cvbench_core::Dataset;

/// A mid-sized Gaussian blob dataset, deterministic per (k, size, dims).
pub fn fixture(k_star: usize, cluster_size: usize, dims: usize) -> Dataset {
    let cfg = GenConfig {
        k_star,
        dimensions: dims,
        cluster_size_range: (cluster_size, cluster_size),
        total_cap: k_star * cluster_size,
        compactness: Compactness::Fixed(0.1),
        seed: 0xBE7C,
        ..GenConfig::default()
    };
    generate_dataset(format!("bench-k{k_star}-n{cluster_size}-d{dims}"), &cfg)
        .expect("fixture generation")
}
