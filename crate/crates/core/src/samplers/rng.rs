//! Replayable random-number streams. Each proposal gets a fresh ChaCha8
//! generator keyed by `(seed, chain_id, step_index)`, so any step of any
//! chain can be reproduced in isolation and chains can run on independent
//! threads without coordination.
//!
//! Draw order inside a step is fixed: momentum/velocity standard normals
//! first (coordinate order), then the MH uniform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator for one proposal of one chain.
pub fn step_rng(seed: u64, chain_id: u64, step_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&chain_id.to_le_bytes());
    key[16..24].copy_from_slice(&step_index.to_le_bytes());
    key[24..32].copy_from_slice(b"mpdiff.1");
    ChaCha8Rng::from_seed(key)
}

pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.0..1.0)
}
