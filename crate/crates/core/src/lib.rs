//! Numerical verification of locally conformal Kähler geometry on explicit charts.

pub mod cli;
pub mod error;
pub mod fields;
pub mod gallery;
pub mod jets;
pub mod lck;
pub mod moment;
pub mod reduce;
pub mod weyl;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic sample points from a chart.
pub fn sample_points(chart: &fields::Chart, count: usize, seed: u64) -> Vec<fields::Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chart.sample(&mut rng, count)
}
