//! Seed and stream derivation for reproducible Monte Carlo runs.
//!
//! Every random quantity in the crate is drawn from a counter-based ChaCha
//! generator whose stream id encodes what the draw is for. Trial streams are
//! keyed by `(master_seed, grid_index, trial_index)`, so a sweep produces the
//! same numbers no matter how trials are scheduled across threads. Scenario
//! streams (angle draws, per-antenna gain draws) live in a disjoint id range
//! and cannot collide with trial streams.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::distr::StandardUniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Trial indices occupy the low 40 bits of a stream id.
const TRIAL_BITS: u32 = 40;
const MAX_TRIAL_INDEX: u64 = 1 << TRIAL_BITS;
/// Grid indices may use the next 23 bits; the top bit tags scenario streams.
const MAX_GRID_INDEX: u32 = 1 << 23;
const SCENARIO_TAG: u64 = 1 << 63;

/// RNG for one Monte Carlo trial at one sweep grid point.
pub fn trial_rng(master_seed: u64, grid_index: u32, trial_index: u64) -> ChaCha8Rng {
    assert!(trial_index < MAX_TRIAL_INDEX, "trial index out of range");
    assert!(grid_index < MAX_GRID_INDEX, "grid index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((grid_index as u64) << TRIAL_BITS) | trial_index);
    rng
}

/// RNG for scenario-level draws (angles, per-antenna gains), disjoint from
/// every trial stream of the same seed.
pub fn scenario_rng(scenario_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
    rng.set_stream(SCENARIO_TAG | stream);
    rng
}

/// One draw from the standard complex normal CN(0, 1): independent real and
/// imaginary parts with variance 1/2 each.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A length-`m` vector with i.i.d. CN(0, 1) entries, drawn in index order.
pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DVector<Complex64> {
    DVector::from_iterator(m, (0..m).map(|_| complex_gaussian(rng)))
}

/// Uniform draw from [-pi, pi).
pub fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(StandardUniform);
    (2.0 * u - 1.0) * std::f64::consts::PI
}

/// Derives an independent sub-seed from a base seed and a tag (SplitMix64
/// finalizer). Used to give each scenario link its own per-antenna gain
/// seed without the links sharing draws.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base.wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
