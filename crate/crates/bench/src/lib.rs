//! Shared fixtures for the criterion benches.

use twd_core::synthetic::{generate, GenConfig};
use twd_core::Dataset;

/// Deterministic mixed-motion dataset.
pub fn fixture(scene_count: usize, seed: u64) -> Dataset {
    generate(&GenConfig {
        scene_count,
        seed,
        ..GenConfig::default()
    })
    .expect("default generator config is valid")
}
