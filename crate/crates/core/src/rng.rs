//! Seeded randomness. Every randomised routine takes a `u64` seed and derives
//! independent streams with [`derive_seed`], so results never depend on call
//! order or scheduling.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser over `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A Dirichlet(1, ..., 1) draw: uniform on the probability simplex.
pub fn uniform_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            // open interval (0, 1] keeps the logarithm finite
            let u: f64 = 1.0 - rng.gen::<f64>();
            -math::ln(u)
        })
        .collect();
    let total: f64 = v.iter().sum();
    for x in &mut v {
        *x /= total;
    }
    v
}

/// A nonnegative unit vector with uniformly distributed direction.
pub fn nonnegative_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| math::abs(gaussian(rng))).collect();
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Standard normal via Box-Muller.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    math::sqrt(-2.0 * math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}
