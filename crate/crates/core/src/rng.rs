//! Deterministic, splittable random streams.
//!
//! A stream is named by a master seed and a path of indices, e.g.
//! `(seed, [point, sim])`. The path is folded through SplitMix64 into a
//! ChaCha8 key, so any stream can be materialised on any thread without
//! shared state and yields the same draws on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// Names a random substream: `(master_seed, path)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub path: Vec<u64>,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, path: Vec::new() }
    }

    pub fn with_path(master_seed: u64, path: &[u64]) -> Self {
        Self { master_seed, path: path.to_vec() }
    }

    /// The substream one level below this one.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self { master_seed: self.master_seed, path }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.master_seed);
        // length-prefix so [] and [0] differ
        state = splitmix64(state ^ (self.path.len() as u64).wrapping_mul(0xA24B_AED4_963E_E407));
        for &p in &self.path {
            state = splitmix64(state ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        let mut key = [0u8; 32];
        let mut s = state;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.key())
    }
}

/// `n` i.i.d. draws from Normal(mu, sigma). `sigma = 0` yields the constant `mu`.
pub fn sample_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("normal sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(vec![mu; n]);
    }
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sigma * z
        })
        .collect())
}

/// `n` uniform draws from `levels`.
pub fn sample_categorical<R: Rng + ?Sized>(levels: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(invalid("categorical levels must be non-empty"));
    }
    Ok((0..n).map(|_| levels[rng.random_range(0..levels.len())]).collect())
}

/// One standard-normal draw.
#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
