//! Seeded weight initialization.
//!
//! All draws happen in `f64` and are cast down, so an `f32` and an `f64`
//! model built from the same stream start from the same numbers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{sc, Scalar};

/// Uniform Glorot: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<S: Scalar>(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<S> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| sc(rng.gen_range(-limit..limit))).collect()
}

/// Uniform U(-scale, scale); used for deliberately small output layers.
pub fn uniform<S: Scalar>(rng: &mut ChaCha8Rng, scale: f64, n: usize) -> Vec<S> {
    (0..n).map(|_| sc(rng.gen_range(-scale..scale))).collect()
}

pub fn zeros<S: Scalar>(n: usize) -> Vec<S> {
    vec![S::zero(); n]
}
