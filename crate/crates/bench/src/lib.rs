//! Deterministic inputs shared by the benchmarks.

use stringfx::marketdata::{gen_random_walk_ticks, gen_sinusoid};
use stringfx::{PriceSeries, TickSeries};

/// Strictly positive wave with drift, `n` samples.
pub fn wave(n: usize) -> PriceSeries {
    PriceSeries::new((0..n).map(|k| 2.0 + (k as f64 * 0.05).sin() + 1e-4 * k as f64).collect())
}

/// Canonical 51-point sinusoid.
pub fn sinusoid() -> PriceSeries {
    gen_sinusoid(51, 1.0, 0.0, 0.0).expect("valid sinusoid")
}

/// Seeded random-walk quotes, one per second.
pub fn ticks(n: usize) -> TickSeries {
    gen_random_walk_ticks(n, 1.3, 2e-4, 2e-5, 1_000, 11)
}
