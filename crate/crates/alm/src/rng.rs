//! Seed derivation and candidate streams.
//!
//! Every random stream in the crate is a ChaCha8 generator whose seed is
//! derived from a master seed and a path of integer labels with SplitMix64.
//! The derivation is pure, so replica `i` of a study sees the same stream no
//! matter which thread runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream labels used across modules.
pub mod label {
    pub const INIT: u64 = 1;
    pub const CANDIDATES: u64 = 2;
    pub const BASELINE: u64 = 3;
    pub const REPLICA: u64 = 4;
    pub const PARTICLE: u64 = 5;
    pub const VALIDATE: u64 = 6;
    pub const DIRECTIONS: u64 = 7;
    pub const BOOTSTRAP: u64 = 8;
    pub const QUADRATURE: u64 = 9;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(seed, index)`.
#[inline]
pub fn split(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| split(s, i))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(seed, path))
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open01(rng).ln() / rate
}

/// One thinning candidate: waiting time, target index, acceptance uniform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub dt: f64,
    pub index: usize,
    pub u: f64,
}

/// Dominating Poisson clock at `rate` with uniform marks over `n` targets.
pub struct CandidateStream {
    rng: StreamRng,
    rate: f64,
    n: usize,
}

impl CandidateStream {
    pub fn new(rng: StreamRng, rate: f64, n: usize) -> Self {
        Self { rng, rate, n }
    }

    #[inline]
    pub fn next_candidate(&mut self) -> Candidate {
        let dt = exponential(&mut self.rng, self.rate);
        let index = if self.n == 1 { 0 } else { self.rng.random_range(0..self.n) };
        let u: f64 = self.rng.random();
        Candidate { dt, index, u }
    }
}
