//! Seeded per-UAV random streams.
//!
//! Every UAV draws from its own ChaCha8 stream: `seed_from_u64(seed)` with
//! the stream number set to the UAV index plus one. Stream 0 is reserved for
//! network-level draws. Adding UAVs therefore never perturbs the draws of
//! existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GENERATOR_ID: &str =
    "ChaCha8Rng (rand_chacha 0.9) seed_from_u64(seed); stream 0 = network, stream i+1 = UAV i";

pub fn network_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uav_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Uniform draw in `[min_pct, max_pct]`, consuming exactly one `f64`.
pub fn sample_consumption<R: Rng + ?Sized>(rng: &mut R, min_pct: f64, max_pct: f64) -> f64 {
    let u: f64 = rng.random();
    min_pct + (max_pct - min_pct) * u
}

/// Independent uniform components in `[-max_step, max_step]`.
pub fn sample_displacement<R: Rng + ?Sized>(rng: &mut R, max_step: f64) -> (f64, f64) {
    let ux: f64 = rng.random();
    let uy: f64 = rng.random();
    ((2.0 * ux - 1.0) * max_step, (2.0 * uy - 1.0) * max_step)
}
