//! Deterministic random number generation.
//!
//! Everything random in this crate flows through ChaCha8
//! ([`rand_chacha::ChaCha8Rng`]), seeded from a single `u64`. The generator
//! is part of the external interface: given the same seed, every build on
//! every platform consumes the same random stream and produces the same
//! draws, so pruning runs, sweeps, and calibrations are reproducible from
//! one number.
//!
//! Independent substreams are derived with [`substream`], a splitmix64 chain
//! over an index tuple. The crate-wide splitting conventions:
//!
//! * whole-network pruning: `substream(seed, &[STREAM_LAYER, layer])`,
//!   redraw attempts append the attempt counter;
//! * sweeps: `substream(master, &[STREAM_ROW, method, budget, trial])`;
//! * synthetic instances: `substream(master, &[STREAM_INSTANCE])`;
//! * query generation: `substream(master, &[STREAM_QUERIES])`.

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Domain tag for per-layer pruning streams.
pub const STREAM_LAYER: u64 = 0x4c41_5945;
/// Domain tag for per-(method, budget, trial) sweep rows.
pub const STREAM_ROW: u64 = 0x524f_5753;
/// Domain tag for synthetic instance generation.
pub const STREAM_INSTANCE: u64 = 0x494e_5354;
/// Domain tag for query-set generation.
pub const STREAM_QUERIES: u64 = 0x5155_4552;
/// Domain tag for calibration trials.
pub const STREAM_TRIAL: u64 = 0x5452_4941;

/// The crate's fixed generator, seeded from a single `u64`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent substream seed from a master seed and an index
/// tuple. Distinct tuples give (with overwhelming probability) disjoint
/// ChaCha8 streams; the chain is order-sensitive, so `[a, b]` and `[b, a]`
/// differ.
pub fn substream(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x6a09_e667_f3bc_c909);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// One standard normal deviate via Box-Muller (consumes two uniforms).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A vector of iid standard normals.
pub fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| standard_normal(rng)).collect()
}

/// A point drawn uniformly from the ball of radius `beta` in `R^dim`:
/// normalized Gaussian direction times `beta * U^{1/dim}`.
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize, beta: f64) -> Vec<f64> {
    let mut dir = normal_vec(rng, dim);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Probability-zero fallback; the origin is in every ball.
        return dir;
    }
    let u: f64 = rng.gen();
    let radius = beta * u.powf(1.0 / dim as f64);
    for v in &mut dir {
        *v *= radius / norm;
    }
    dir
}
