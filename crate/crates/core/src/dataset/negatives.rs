//! Number of interference clips injected per sample.

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const NEGATIVE_MEAN: f64 = 2.5;
/// Variance, not standard deviation.
pub const NEGATIVE_VARIANCE: f64 = 8.0;

/// `max(0, round(g))` with `g ~ Normal(2.5, variance 8)`.
pub fn sample_negative_count(rng: &mut impl Rng) -> u32 {
    let normal = Normal::new(NEGATIVE_MEAN, NEGATIVE_VARIANCE.sqrt()).expect("finite positive sigma");
    let g: f64 = normal.sample(rng);
    g.round().max(0.0) as u32
}
