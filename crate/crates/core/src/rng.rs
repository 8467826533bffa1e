//! Seed derivation.
//!
//! Every random consumer draws from its own ChaCha stream whose seed is
//! derived from a user seed plus a purpose tag (and optional integer path),
//! so independent consumers never share state and any single stream can be
//! reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for the stream identified by `(seed, tag, path...)`.
pub fn derive_seed(seed: u64, tag: &str, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(tag));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

pub fn stream(seed: u64, tag: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag, &[]))
}

pub fn stream_at(seed: u64, tag: &str, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, tag, path))
}

/// Inverse-CDF sampler over a finite probability vector.
#[derive(Debug, Clone)]
pub(crate) struct Categorical {
    cdf: Vec<f64>,
    last: usize,
}

impl Categorical {
    pub(crate) fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cdf, last }
    }

    pub(crate) fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // cdf is nondecreasing, so the first index with u < cdf[i] has positive mass.
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.last)
    }
}
