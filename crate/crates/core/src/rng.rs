//! Seeded random streams and the few distributions the pipeline needs.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed and a path of indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    h
}

/// A stream for `seed` specialised by `path`.
pub fn stream(seed: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, path))
}

/// Uniform in `[0, 1)` with 53 bits of precision.
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Uniform index in `0..n`. `n` must be positive.
pub fn index<R: RngCore>(rng: &mut R, n: usize) -> usize {
    ((uniform01(rng) * n as f64) as usize).min(n - 1)
}

/// Standard normal draw (Box-Muller).
pub fn normal<R: RngCore>(rng: &mut R) -> f64 {
    let mut u1 = uniform01(rng);
    while u1 <= f64::MIN_POSITIVE {
        u1 = uniform01(rng);
    }
    let u2 = uniform01(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

pub fn bernoulli<R: RngCore>(rng: &mut R, p: f64) -> bool {
    uniform01(rng) < p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_streams_differ_and_repeat() {
        let a: u64 = stream(7, &[1, 2]).next_u64();
        let b: u64 = stream(7, &[1, 2]).next_u64();
        let c: u64 = stream(7, &[2, 1]).next_u64();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_moments() {
        let mut r = stream(3, &[]);
        let n = 20000;
        let xs: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.03);
        assert!((v - 1.0).abs() < 0.05);
    }
}
